"""End-to-end policy construction: gold phase, estimation, LP solve."""

from __future__ import annotations

from dataclasses import dataclass

from .bounds import BoundQuery, fairness_violation_bound
from .estimation import GoldPhaseConfig, GoldResponseTally, estimate_matrices, run_gold_phase
from .lp import ConstraintSet, LpSolution, LpStatus, binding_rows, build_lp, solve_lp
from .model import AccuracyMatrix, Policy, Priors, WorkerProfile

BINDING_TOL = 1e-6
DEFAULT_CONFIDENCE = 0.9


@dataclass(frozen=True)
class PipelineDiagnostics:
    """Run-level guarantees: the fairness-slack inflation bound at the
    requested confidence, the LP's predicted accuracy, and which
    inequality rows sit within BINDING_TOL of equality."""

    confidence: float
    fairness_bound: float
    predicted_accuracy: float | None
    binding: tuple[str, ...]


@dataclass(frozen=True)
class PipelineResult:
    estimates: tuple[tuple[AccuracyMatrix, AccuracyMatrix], ...]
    solution: LpSolution
    policy: Policy | None
    diagnostics: PipelineDiagnostics


def build_policy(
    workers: list[WorkerProfile],
    gold_cfg: GoldPhaseConfig,
    priors: Priors,
    constraints: ConstraintSet,
    seed: int,
    tallies: list[tuple[str, GoldResponseTally]] | None = None,
    confidence: float = DEFAULT_CONFIDENCE,
) -> PipelineResult:
    """Estimate every worker, build the LP, and solve it.

    When recorded gold tallies are supplied they are matched to workers by
    id and used instead of simulated gold responses; otherwise worker i's
    responses are drawn from the stream (seed, "gold", i).
    """
    if tallies is None:
        estimates = run_gold_phase(workers, gold_cfg, seed)
    else:
        by_id = dict(tallies)
        missing = [w.id for w in workers if w.id not in by_id]
        if missing:
            raise ValueError(f"gold tallies missing for workers: {', '.join(missing)}")
        estimates = [estimate_matrices(by_id[w.id], smoothing=gold_cfg.smoothing) for w in workers]

    lp = build_lp(estimates, [w.cost for w in workers], priors, constraints)
    solution = solve_lp(lp)
    delta = fairness_violation_bound(
        BoundQuery(
            n_workers=len(workers),
            n_gold_per_type=gold_cfg.n_gold_per_type,
            confidence=confidence,
        )
    )
    if solution.status == LpStatus.OPTIMAL:
        diagnostics = PipelineDiagnostics(
            confidence=confidence,
            fairness_bound=delta,
            predicted_accuracy=solution.objective_value,
            binding=binding_rows(lp, solution.policy, BINDING_TOL),
        )
    else:
        diagnostics = PipelineDiagnostics(
            confidence=confidence,
            fairness_bound=delta,
            predicted_accuracy=None,
            binding=(),
        )
    return PipelineResult(
        estimates=tuple(estimates),
        solution=solution,
        policy=solution.policy,
        diagnostics=diagnostics,
    )
