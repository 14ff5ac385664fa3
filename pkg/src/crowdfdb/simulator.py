"""Seeded experiment harness.

One repetition runs the full loop: simulate the gold phase, estimate
worker matrices, build the assignment rule for the configured method
(LP policy, uniform random, or greedy fill), hand every pool task to a
worker, sample her label from her true matrices, and score empirical
group error rates, accuracy, and realized cost.  Repetitions use derived
independent streams, so they can run in parallel (set CROWDFDB_THREADS)
with results identical to sequential execution, and a sweep re-runs the
repetitions at each value of the swept parameter.

Results are written as delimited text with one row per (sweep value,
repetition) plus "mean" and "se" aggregate rows per sweep value; the
column set is a stable tooling contract (see write_results_csv).
"""

from __future__ import annotations

import csv
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .baselines import CapacityError, greedy_plan, random_policy
from .datagen import (
    PopulationSpec,
    TaskPoolSpec,
    TaskRecord,
    generate_population,
    generate_task_pool,
    load_tasks,
    load_workers,
)
from .estimation import GoldPhaseConfig, run_gold_phase
from .lp import ConstraintSet, LpStatus
from .model import Priors, WorkerProfile
from .pipeline import build_policy
from .rng import mix, stream

METHODS = ("CrowdFDB", "Random", "Greedy")
THREADS_ENV_VAR = "CROWDFDB_THREADS"

SWEEP_GOLD = "gold"
SWEEP_ALPHA = "alpha"


@dataclass(frozen=True)
class SweepSpec:
    parameter: str  # SWEEP_GOLD or SWEEP_ALPHA
    values: tuple[float, ...]

    def __post_init__(self) -> None:
        if self.parameter not in (SWEEP_GOLD, SWEEP_ALPHA):
            raise ValueError(f"sweep parameter must be 'gold' or 'alpha', got {self.parameter!r}")
        if not self.values:
            raise ValueError("sweep needs at least one value")
        for v in self.values:
            if self.parameter == SWEEP_GOLD and (int(v) != v or v < 1):
                raise ValueError(f"gold sweep values must be integers >= 1, got {v}")
            if self.parameter == SWEEP_ALPHA and v < 0:
                raise ValueError(f"alpha sweep values must be >= 0, got {v}")


@dataclass(frozen=True)
class ExperimentConfig:
    """Full description of one experiment (one method)."""

    method: str
    gold: GoldPhaseConfig
    constraints: ConstraintSet
    repetitions: int
    seed: int
    population: PopulationSpec | None = None
    worker_file: str | None = None
    task_pool: TaskPoolSpec | None = None
    task_file: str | None = None
    sweep: SweepSpec | None = None
    priors: Priors | None = None

    def __post_init__(self) -> None:
        if self.method not in METHODS:
            raise ValueError(f"method must be one of {METHODS}, got {self.method!r}")
        if self.repetitions < 1:
            raise ValueError(f"repetitions must be >= 1, got {self.repetitions}")
        if (self.population is None) == (self.worker_file is None):
            raise ValueError("exactly one of population / worker_file must be set")
        if (self.task_pool is None) == (self.task_file is None):
            raise ValueError("exactly one of task_pool / task_file must be set")


@dataclass(frozen=True)
class MetricsReport:
    """Scores for one repetition (or a score_labels fragment).

    Rates are None when their denominator is zero ("marked absent");
    cell tuples are ordered (z0y0, z0y1, z1y0, z1y1).
    """

    lp_status: str  # "optimal" | "infeasible" | "-" (methods without an LP)
    fpr_gap: float | None = None
    fnr_gap: float | None = None
    accuracy: float | None = None
    mean_cost: float | None = None
    entropy: float | None = None
    cell_tasks: tuple[int, int, int, int] | None = None
    cell_errors: tuple[int, int, int, int] | None = None

    @property
    def feasible(self) -> bool:
        return self.lp_status != LpStatus.INFEASIBLE


@dataclass(frozen=True)
class AggregateMetrics:
    """Across-repetition means and standard errors (feasible reps only).

    Pooled gaps recompute the group rates from error counts summed over
    all feasible repetitions, as a secondary view of the same runs.
    """

    n_reps: int
    n_feasible: int
    n_infeasible: int
    mean_fpr_gap: float | None
    se_fpr_gap: float | None
    mean_fnr_gap: float | None
    se_fnr_gap: float | None
    mean_accuracy: float | None
    se_accuracy: float | None
    mean_cost: float | None
    se_cost: float | None
    mean_entropy: float | None
    se_entropy: float | None
    pooled_fpr_gap: float | None
    pooled_fnr_gap: float | None


@dataclass(frozen=True)
class SweepPointResult:
    parameter: str | None
    value: float | None
    reports: tuple[MetricsReport, ...]
    aggregate: AggregateMetrics


def resolve_inputs(cfg: ExperimentConfig) -> tuple[list[WorkerProfile], list[TaskRecord], Priors]:
    """Materialize workers, tasks, and priors from specs or files."""
    workers = (
        generate_population(cfg.population) if cfg.population is not None else load_workers(cfg.worker_file)
    )
    tasks = generate_task_pool(cfg.task_pool) if cfg.task_pool is not None else load_tasks(cfg.task_file)
    if cfg.priors is not None:
        priors = cfg.priors
    elif cfg.task_pool is not None:
        spec = cfg.task_pool
        total = spec.n_z0 + spec.n_z1
        if total == 0:
            raise ValueError("task pool is empty; supply explicit priors")
        priors = Priors(
            p_z1=spec.n_z1 / total,
            p_y1_given_z0=spec.base_rate_z0,
            p_y1_given_z1=spec.base_rate_z1,
        )
    else:
        zs = np.array([t.z for t in tasks])
        ys = np.array([t.y for t in tasks])
        if zs.size == 0 or not (zs == 0).any() or not (zs == 1).any():
            raise ValueError("task file lacks one of the groups; supply explicit priors")
        priors = Priors(
            p_z1=float(zs.mean()),
            p_y1_given_z0=float(ys[zs == 0].mean()),
            p_y1_given_z1=float(ys[zs == 1].mean()),
        )
    return workers, tasks, priors


def score_labels(records: list[tuple[int, int, int]]) -> MetricsReport:
    """Empirical rates from (z, y, collected label) triples."""
    if not records:
        raise ValueError("need at least one record to score")
    arr = np.asarray(records, dtype=int)
    return _score_arrays(arr[:, 0], arr[:, 1], arr[:, 2])


def _score_arrays(zs: np.ndarray, ys: np.ndarray, yhats: np.ndarray) -> MetricsReport:
    errors = yhats != ys
    cell_tasks = []
    cell_errors = []
    rate = {}
    for z in (0, 1):
        for y in (0, 1):
            mask = (zs == z) & (ys == y)
            count = int(mask.sum())
            wrong = int(errors[mask].sum())
            cell_tasks.append(count)
            cell_errors.append(wrong)
            rate[(z, y)] = wrong / count if count > 0 else None
    fpr_gap = (
        abs(rate[(0, 0)] - rate[(1, 0)])
        if rate[(0, 0)] is not None and rate[(1, 0)] is not None
        else None
    )
    fnr_gap = (
        abs(rate[(0, 1)] - rate[(1, 1)])
        if rate[(0, 1)] is not None and rate[(1, 1)] is not None
        else None
    )
    accuracy = 1.0 - float(errors.sum()) / float(zs.size)
    return MetricsReport(
        lp_status="-",
        fpr_gap=fpr_gap,
        fnr_gap=fnr_gap,
        accuracy=accuracy,
        cell_tasks=tuple(cell_tasks),
        cell_errors=tuple(cell_errors),
    )


def _entropy_of(weights: np.ndarray) -> float:
    w = weights[weights > 0.0]
    return float(-(w * np.log(w)).sum())


def run_once(
    cfg: ExperimentConfig,
    rep_index: int,
    _resolved: tuple[list[WorkerProfile], list[TaskRecord], Priors] | None = None,
) -> MetricsReport:
    """One repetition; deterministic given (cfg.seed, rep_index).

    The gold stream is keyed by the gold-task count as well, so sweeping
    alpha reuses identical estimates per repetition (paired comparisons)
    while sweeping the gold count re-draws them.
    """
    workers, tasks, priors = _resolved if _resolved is not None else resolve_inputs(cfg)
    n = len(workers)
    n_tasks = len(tasks)
    costs = np.array([w.cost for w in workers])
    gold_seed = mix(cfg.seed, "goldphase", cfg.gold.n_gold_per_type, rep_index)

    weights: np.ndarray | None = None
    assignment: np.ndarray | None = None
    lp_status = "-"
    if cfg.method == "CrowdFDB":
        result = build_policy(workers, cfg.gold, priors, cfg.constraints, seed=gold_seed)
        if result.solution.status != LpStatus.OPTIMAL:
            return MetricsReport(lp_status=result.solution.status)
        weights = result.policy.weights
        entropy = result.policy.entropy()
        lp_status = LpStatus.OPTIMAL
    elif cfg.method == "Random":
        weights = random_policy(n).weights
        entropy = _entropy_of(weights)
    else:  # Greedy
        estimates = run_gold_phase(workers, cfg.gold, gold_seed)
        try:
            plan = greedy_plan(estimates, costs, priors, cfg.constraints.beta, n_tasks)
        except CapacityError:
            return MetricsReport(lp_status=LpStatus.INFEASIBLE)
        assignment = plan.assignment_sequence()
        entropy = _entropy_of(np.array(plan.counts) / n_tasks)

    zs = np.array([t.z for t in tasks])
    ys = np.array([t.y for t in tasks])
    rng = stream(cfg.seed, "collect", rep_index)
    if assignment is None:
        # inverse-CDF draw keeps worker choice fully determined by the stream
        cumulative = np.cumsum(weights)
        chosen = np.searchsorted(cumulative, rng.random(n_tasks), side="right")
        chosen = np.minimum(chosen, n - 1)
    else:
        chosen = assignment

    p_label_one = np.array(
        [[[w.matrix(z)[y, 1] for y in (0, 1)] for z in (0, 1)] for w in workers]
    )
    yhats = (rng.random(n_tasks) < p_label_one[chosen, zs, ys]).astype(int)

    scored = _score_arrays(zs, ys, yhats)
    return replace(
        scored,
        lp_status=lp_status,
        mean_cost=float(costs[chosen].mean()),
        entropy=entropy,
    )


def _run_rep(args) -> MetricsReport:
    cfg, rep_index, resolved = args
    return run_once(cfg, rep_index, _resolved=resolved)


def _thread_count() -> int:
    raw = os.environ.get(THREADS_ENV_VAR, "1")
    try:
        value = int(raw)
    except ValueError:
        raise ValueError(f"{THREADS_ENV_VAR} must be an integer, got {raw!r}")
    if value < 1:
        raise ValueError(f"{THREADS_ENV_VAR} must be >= 1, got {value}")
    return value


def _mean_se(values: list[float]) -> tuple[float | None, float | None]:
    if not values:
        return None, None
    arr = np.array(values, dtype=float)
    mean = float(arr.mean())
    if arr.size < 2:
        return mean, None
    return mean, float(arr.std(ddof=1) / np.sqrt(arr.size))


def aggregate_reports(reports: list[MetricsReport]) -> AggregateMetrics:
    feasible = [r for r in reports if r.feasible]

    def collect(getter) -> list[float]:
        return [getter(r) for r in feasible if getter(r) is not None]

    mean_fpr, se_fpr = _mean_se(collect(lambda r: r.fpr_gap))
    mean_fnr, se_fnr = _mean_se(collect(lambda r: r.fnr_gap))
    mean_acc, se_acc = _mean_se(collect(lambda r: r.accuracy))
    mean_cost, se_cost = _mean_se(collect(lambda r: r.mean_cost))
    mean_ent, se_ent = _mean_se(collect(lambda r: r.entropy))

    tasks = np.zeros(4, dtype=int)
    errors = np.zeros(4, dtype=int)
    for r in feasible:
        if r.cell_tasks is not None:
            tasks += np.array(r.cell_tasks)
            errors += np.array(r.cell_errors)

    def pooled_rate(cell: int) -> float | None:
        return errors[cell] / tasks[cell] if tasks[cell] > 0 else None

    rate_z0_fp, rate_z1_fp = pooled_rate(0), pooled_rate(2)
    rate_z0_fn, rate_z1_fn = pooled_rate(1), pooled_rate(3)
    pooled_fpr = abs(rate_z0_fp - rate_z1_fp) if rate_z0_fp is not None and rate_z1_fp is not None else None
    pooled_fnr = abs(rate_z0_fn - rate_z1_fn) if rate_z0_fn is not None and rate_z1_fn is not None else None

    return AggregateMetrics(
        n_reps=len(reports),
        n_feasible=len(feasible),
        n_infeasible=len(reports) - len(feasible),
        mean_fpr_gap=mean_fpr,
        se_fpr_gap=se_fpr,
        mean_fnr_gap=mean_fnr,
        se_fnr_gap=se_fnr,
        mean_accuracy=mean_acc,
        se_accuracy=se_acc,
        mean_cost=mean_cost,
        se_cost=se_cost,
        mean_entropy=mean_ent,
        se_entropy=se_ent,
        pooled_fpr_gap=pooled_fpr,
        pooled_fnr_gap=pooled_fnr,
    )


def _apply_sweep(cfg: ExperimentConfig, parameter: str, value: float) -> ExperimentConfig:
    if parameter == SWEEP_GOLD:
        return replace(
            cfg, gold=GoldPhaseConfig(n_gold_per_type=int(value), smoothing=cfg.gold.smoothing)
        )
    return replace(
        cfg,
        constraints=ConstraintSet(
            alpha=float(value),
            beta=cfg.constraints.beta,
            budget=cfg.constraints.budget,
            fairness_kind=cfg.constraints.fairness_kind,
        ),
    )


def run_experiment(cfg: ExperimentConfig) -> list[SweepPointResult]:
    """Run all repetitions at every sweep point and aggregate.

    Repetitions execute in a process pool when CROWDFDB_THREADS > 1;
    outputs are aggregated in repetition order either way.
    """
    resolved = resolve_inputs(cfg)
    if cfg.sweep is not None:
        points = [(cfg.sweep.parameter, v) for v in cfg.sweep.values]
    else:
        points = [(None, None)]

    threads = _thread_count()
    results = []
    for parameter, value in points:
        cfg_point = cfg if parameter is None else _apply_sweep(cfg, parameter, value)
        jobs = [(cfg_point, rep, resolved) for rep in range(cfg.repetitions)]
        if threads > 1 and cfg.repetitions > 1:
            chunk = max(1, cfg.repetitions // (4 * threads))
            with ProcessPoolExecutor(max_workers=threads) as pool:
                reports = list(pool.map(_run_rep, jobs, chunksize=chunk))
        else:
            reports = [_run_rep(job) for job in jobs]
        results.append(
            SweepPointResult(
                parameter=parameter,
                value=value,
                reports=tuple(reports),
                aggregate=aggregate_reports(reports),
            )
        )
    return results


RESULTS_COLUMNS = [
    "sweep_param",
    "sweep_value",
    "method",
    "row_kind",
    "rep",
    "lp_status",
    "fpr_gap",
    "fnr_gap",
    "accuracy",
    "mean_cost",
    "entropy",
    "n_z0_y0",
    "n_z0_y1",
    "n_z1_y0",
    "n_z1_y1",
    "err_z0_y0",
    "err_z0_y1",
    "err_z1_y0",
    "err_z1_y1",
    "n_reps",
    "n_feasible",
    "n_infeasible",
    "pooled_fpr_gap",
    "pooled_fnr_gap",
]


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(float(value))  # shortest round-trip decimal, plain float repr
    return str(value)


def _sweep_value_str(parameter: str | None, value: float | None) -> str:
    if value is None:
        return ""
    if parameter == SWEEP_GOLD:
        return str(int(value))
    return repr(float(value))


def write_results_csv(
    path: str | Path, results_by_method: list[tuple[str, list[SweepPointResult]]]
) -> None:
    """Write the stable long-format results table.

    Per-repetition rows (row_kind "rep") carry that run's metrics and
    confusion-cell counts; "mean" and "se" rows carry the aggregate for
    their (sweep value, method) group, including the pooled gaps and the
    feasible/infeasible repetition counts.
    """
    with open(path, "w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(RESULTS_COLUMNS)
        for method, points in results_by_method:
            for point in points:
                param = point.parameter if point.parameter is not None else "none"
                value_str = _sweep_value_str(point.parameter, point.value)
                for rep, report in enumerate(point.reports):
                    cells = report.cell_tasks if report.cell_tasks is not None else (None,) * 4
                    errs = report.cell_errors if report.cell_errors is not None else (None,) * 4
                    writer.writerow(
                        [
                            param,
                            value_str,
                            method,
                            "rep",
                            rep,
                            report.lp_status,
                            _fmt(report.fpr_gap),
                            _fmt(report.fnr_gap),
                            _fmt(report.accuracy),
                            _fmt(report.mean_cost),
                            _fmt(report.entropy),
                            *[_fmt(c) for c in cells],
                            *[_fmt(e) for e in errs],
                            "",
                            "",
                            "",
                            "",
                            "",
                        ]
                    )
                agg = point.aggregate
                for kind, gap_f, gap_n, acc, cost, ent in (
                    ("mean", agg.mean_fpr_gap, agg.mean_fnr_gap, agg.mean_accuracy, agg.mean_cost, agg.mean_entropy),
                    ("se", agg.se_fpr_gap, agg.se_fnr_gap, agg.se_accuracy, agg.se_cost, agg.se_entropy),
                ):
                    writer.writerow(
                        [
                            param,
                            value_str,
                            method,
                            kind,
                            "",
                            "",
                            _fmt(gap_f),
                            _fmt(gap_n),
                            _fmt(acc),
                            _fmt(cost),
                            _fmt(ent),
                            *[""] * 8,
                            agg.n_reps,
                            agg.n_feasible,
                            agg.n_infeasible,
                            _fmt(agg.pooled_fpr_gap) if kind == "mean" else "",
                            _fmt(agg.pooled_fnr_gap) if kind == "mean" else "",
                        ]
                    )
