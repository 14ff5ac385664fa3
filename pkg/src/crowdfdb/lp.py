"""Linear program over selection probabilities, and a dense simplex solver.

The program maximizes expected label accuracy (stated below as the
equivalent minimization of its negation) over policies S subject to:

    sum_i S[i] = 1
    0 <= S[i] <= beta                        (diversity caps)
    |sum_i S[i] * gap_i| <= alpha            (fairness rows, per error kind)
    sum_i S[i] * c_i <= C                    (expected per-label budget)

where gap_i is worker i's between-group difference of the constrained
error-rate entry.  A fairness slack or budget of +inf omits the matching
rows.  Problems of this shape are bounded (the feasible set sits inside
the probability simplex), so a returned Unbounded status signals a
builder bug rather than a legitimate outcome.

The solver is a two-phase primal simplex on the dense standard-form
tableau.  Pivoting uses Dantzig's most-negative reduced cost for speed
and switches to Bland's rule whenever a run of degenerate pivots exceeds
a fixed threshold, which restores the anti-cycling guarantee while
keeping every choice deterministic.  Feasibility is accepted at 1e-7 and
reduced costs at 1e-9 (see Tolerances in model.py).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .model import (
    AccuracyMatrix,
    FairnessKind,
    Policy,
    Priors,
    TOL,
    diagonal_accuracies,
)

FEASIBILITY_TOL = TOL.lp_feasibility
OPTIMALITY_TOL = TOL.lp_optimality
_RATIO_TOL = 1e-11
_DEGENERATE_SWITCH = 24  # consecutive degenerate pivots before engaging Bland


class SolverError(RuntimeError):
    """Simplex did not terminate within the cycling guard."""


@dataclass(frozen=True)
class ConstraintSet:
    """Requester constraints: fairness slack, diversity cap, budget cap."""

    alpha: float
    beta: float
    budget: float
    fairness_kind: FairnessKind = FairnessKind.ERROR_RATE_PARITY

    def __post_init__(self) -> None:
        if not 0.0 <= self.beta < 1.0:
            raise ValueError(f"beta must lie in [0, 1), got {self.beta}")
        if not self.alpha >= 0.0:
            raise ValueError(f"alpha must be >= 0, got {self.alpha}")
        if not self.budget >= 0.0:
            raise ValueError(f"budget must be >= 0, got {self.budget}")
        if not isinstance(self.fairness_kind, FairnessKind):
            raise ValueError(f"fairness_kind must be a FairnessKind, got {self.fairness_kind!r}")


@dataclass(frozen=True, eq=False)
class Row:
    """One linear constraint: coeffs . S  (relation)  rhs."""

    coeffs: np.ndarray
    relation: str  # "<=" or "=="
    rhs: float
    family: str  # "total" | "diversity" | "fairness" | "budget"
    label: str

    def __post_init__(self) -> None:
        c = np.array(self.coeffs, dtype=float)
        c.flags.writeable = False
        object.__setattr__(self, "coeffs", c)
        if self.relation not in ("<=", "=="):
            raise ValueError(f"relation must be '<=' or '==', got {self.relation!r}")


@dataclass(frozen=True, eq=False)
class LpProblem:
    """Objective vector (to minimize) plus constraint rows over n weights."""

    objective: np.ndarray
    rows: tuple[Row, ...]

    def __post_init__(self) -> None:
        c = np.array(self.objective, dtype=float)
        c.flags.writeable = False
        object.__setattr__(self, "objective", c)
        n = self.n
        for row in self.rows:
            if row.coeffs.size != n:
                raise ValueError(f"row {row.label!r} has {row.coeffs.size} coefficients, expected {n}")
        n_eq = sum(1 for row in self.rows if row.relation == "==")
        if n_eq != 1:
            raise ValueError(f"expected exactly one equality row, found {n_eq}")

    @property
    def n(self) -> int:
        return int(self.objective.size)


@dataclass(frozen=True)
class Violation:
    index: int  # row index, or -1 for a variable-bound violation
    label: str
    amount: float


class LpStatus:
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"


@dataclass(frozen=True)
class LpSolution:
    """Solver outcome; objective_value is the achieved expected accuracy
    (sign-corrected to positive) when status is optimal."""

    status: str
    policy: Policy | None = None
    objective_value: float | None = None
    relaxation_hints: tuple[str, ...] = ()


def build_lp(
    estimates: list[tuple[AccuracyMatrix, AccuracyMatrix]],
    costs: list[float] | np.ndarray,
    priors: Priors,
    cs: ConstraintSet,
) -> LpProblem:
    """Assemble the accuracy-maximization LP from per-worker matrix pairs.

    The objective coefficient for worker i is the negated prior-weighted
    sum of her estimated diagonal entries, so minimizing it maximizes
    expected accuracy.  Fairness rows encode the mixture-level gap as a
    pair of <= alpha rows per constrained error kind; they are expanded to
    per-worker coefficients gap_i = A_i0[entry] - A_i1[entry] because the
    mixture gap is linear in S.
    """
    n = len(estimates)
    if n < 1:
        raise ValueError("need at least one worker")
    costs = np.asarray(costs, dtype=float)
    if costs.size != n:
        raise ValueError(f"got {costs.size} costs for {n} workers")

    objective = -diagonal_accuracies(estimates, priors)
    rows: list[Row] = [
        Row(np.ones(n), "==", 1.0, "total", "total"),
    ]
    for i in range(n):
        e = np.zeros(n)
        e[i] = 1.0
        rows.append(Row(e, "<=", cs.beta, "diversity", f"diversity[{i}]"))

    if cs.fairness_kind is not FairnessKind.NONE and math.isfinite(cs.alpha):
        kinds = []
        if cs.fairness_kind in (FairnessKind.FPR_PARITY, FairnessKind.ERROR_RATE_PARITY):
            kinds.append(("fpr", np.array([m0.fpr - m1.fpr for m0, m1 in estimates])))
        if cs.fairness_kind in (FairnessKind.FNR_PARITY, FairnessKind.ERROR_RATE_PARITY):
            kinds.append(("fnr", np.array([m0.fnr - m1.fnr for m0, m1 in estimates])))
        for name, gaps in kinds:
            rows.append(Row(gaps, "<=", cs.alpha, "fairness", f"{name}[+]"))
            rows.append(Row(-gaps, "<=", cs.alpha, "fairness", f"{name}[-]"))

    if math.isfinite(cs.budget):
        rows.append(Row(costs.copy(), "<=", cs.budget, "budget", "budget"))

    return LpProblem(objective=objective, rows=tuple(rows))


def _simplex_phase(
    T: np.ndarray,
    basis: np.ndarray,
    cost_row: int,
    n_rows: int,
    allowed: np.ndarray,
    max_iter: int,
) -> str:
    """Run simplex pivots on the tableau until the cost row is optimal.

    Returns "optimal" or "unbounded"; raises SolverError past max_iter.
    """
    degenerate_streak = 0
    for _ in range(max_iter):
        reduced = T[cost_row, :-1]
        eligible = allowed & (reduced < -OPTIMALITY_TOL)
        if not eligible.any():
            return "optimal"
        if degenerate_streak > _DEGENERATE_SWITCH:
            entering = int(np.flatnonzero(eligible)[0])  # Bland: lowest index
        else:
            candidates = np.where(eligible, reduced, np.inf)
            entering = int(np.argmin(candidates))

        col = T[:n_rows, entering]
        positive = col > _RATIO_TOL
        if not positive.any():
            return "unbounded"
        ratios = np.full(n_rows, np.inf)
        ratios[positive] = T[:n_rows, -1][positive] / col[positive]
        best = ratios.min()
        # deterministic anti-cycling tie-break: smallest basis variable index
        tied = np.flatnonzero(ratios <= best + 1e-15)
        leaving = int(tied[np.argmin(basis[tied])])

        pivot = T[leaving, entering]
        T[leaving, :] /= pivot
        column = T[:, entering].copy()
        column[leaving] = 0.0
        T -= np.outer(column, T[leaving, :])
        T[:, entering] = 0.0
        T[leaving, entering] = 1.0
        basis[leaving] = entering

        degenerate_streak = degenerate_streak + 1 if best <= 1e-12 else 0
    raise SolverError(f"simplex exceeded {max_iter} pivots (cycling guard)")


def _solve_tableau(lp: LpProblem) -> tuple[str, np.ndarray | None]:
    n = lp.n
    m = len(lp.rows)
    le_indices = [k for k, row in enumerate(lp.rows) if row.relation == "<="]
    slack_of = {k: n + j for j, k in enumerate(le_indices)}
    n_slack = len(le_indices)

    # assemble rows, flipping signs so every right-hand side is >= 0
    A = np.zeros((m, n + n_slack))
    b = np.zeros(m)
    needs_artificial = []
    for k, row in enumerate(lp.rows):
        coeffs = row.coeffs.astype(float)
        rhs = float(row.rhs)
        slack_sign = 1.0
        if rhs < 0.0:
            coeffs, rhs, slack_sign = -coeffs, -rhs, -1.0
        A[k, :n] = coeffs
        if row.relation == "<=":
            A[k, slack_of[k]] = slack_sign
        b[k] = rhs
        if row.relation == "==" or slack_sign < 0.0:
            needs_artificial.append(k)

    n_art = len(needs_artificial)
    n_struct = n + n_slack
    ncols = n_struct + n_art
    art_of = {k: n_struct + j for j, k in enumerate(needs_artificial)}

    # tableau: m constraint rows, one phase-2 cost row, one phase-1 cost row
    T = np.zeros((m + 2, ncols + 1))
    T[:m, :n_struct] = A
    T[:m, -1] = b
    basis = np.empty(m, dtype=int)
    for k in range(m):
        if k in art_of:
            T[k, art_of[k]] = 1.0
            basis[k] = art_of[k]
        else:
            basis[k] = slack_of[k]

    c2 = np.zeros(ncols)
    c2[:n] = lp.objective
    T[m, :-1] = c2  # already reduced: initial basic variables all have cost 0

    # phase-1 costs: 1 per artificial, reduced against the artificial basis
    c1 = np.zeros(ncols)
    c1[n_struct:] = 1.0
    T[m + 1, :-1] = c1
    for k in needs_artificial:
        T[m + 1, :] -= T[k, :]

    max_iter = 2000 + 200 * (m + ncols)
    allowed = np.ones(ncols, dtype=bool)
    if n_art:
        status = _simplex_phase(T, basis, m + 1, m, allowed, max_iter)
        if status != "optimal":
            raise SolverError("phase-1 subproblem reported unbounded; tableau is corrupt")
        if -T[m + 1, -1] > 1e-9:
            return LpStatus.INFEASIBLE, None
        # drive any artificial still basic out of the basis (degenerate rows)
        for r in range(m):
            if basis[r] >= n_struct:
                pivots = np.flatnonzero(np.abs(T[r, :n_struct]) > 1e-9)
                if pivots.size:
                    entering = int(pivots[0])
                    pivot = T[r, entering]
                    T[r, :] /= pivot
                    column = T[:, entering].copy()
                    column[r] = 0.0
                    T -= np.outer(column, T[r, :])
                    T[:, entering] = 0.0
                    T[r, entering] = 1.0
                    basis[r] = entering
                # else: the row is redundant; its artificial stays basic at 0

    allowed[n_struct:] = False
    status = _simplex_phase(T, basis, m, m, allowed, max_iter)
    if status == "unbounded":
        return LpStatus.UNBOUNDED, None

    x = np.zeros(ncols)
    x[basis] = T[:m, -1]
    return LpStatus.OPTIMAL, x[:n]


def solve_lp(lp: LpProblem, _with_hints: bool = True) -> LpSolution:
    """Solve to a vertex optimum, or diagnose infeasibility.

    On infeasibility the solution carries relaxation hints: the constraint
    families (fairness / diversity / budget) whose individual removal makes
    the program feasible, so the requester knows what to relax.
    """
    status, x = _solve_tableau(lp)
    if status == LpStatus.OPTIMAL:
        weights = np.clip(x, 0.0, 1.0)
        value = -float(np.dot(lp.objective, weights))
        return LpSolution(status=status, policy=Policy(weights), objective_value=value)
    hints: tuple[str, ...] = ()
    if status == LpStatus.INFEASIBLE and _with_hints:
        hints = tuple(
            family
            for family in ("fairness", "diversity", "budget")
            if any(r.family == family for r in lp.rows)
            and solve_lp(_without_family(lp, family), _with_hints=False).status == LpStatus.OPTIMAL
        )
    return LpSolution(status=status, relaxation_hints=hints)


def _without_family(lp: LpProblem, family: str) -> LpProblem:
    return LpProblem(
        objective=lp.objective,
        rows=tuple(r for r in lp.rows if r.family != family),
    )


def verify_solution(lp: LpProblem, sol: LpSolution, tol: float = FEASIBILITY_TOL) -> list[Violation]:
    """Rows (and nonnegativity bounds) violated by more than tol.

    An empty list is the pass condition used throughout the test suite.
    """
    if sol.status != LpStatus.OPTIMAL or sol.policy is None:
        raise ValueError(f"verify_solution requires an optimal solution, got status {sol.status!r}")
    w = sol.policy.weights
    out = []
    for i in np.flatnonzero(w < -tol):
        out.append(Violation(index=-1, label=f"nonneg[{int(i)}]", amount=float(-w[i])))
    for k, row in enumerate(lp.rows):
        residual = float(np.dot(row.coeffs, w) - row.rhs)
        amount = abs(residual) if row.relation == "==" else residual
        if amount > tol:
            out.append(Violation(index=k, label=row.label, amount=amount))
    return out


def binding_rows(lp: LpProblem, policy: Policy, tol: float = 1e-6) -> tuple[str, ...]:
    """Labels of inequality rows within tol of equality at the policy."""
    w = policy.weights
    return tuple(
        row.label
        for row in lp.rows
        if row.relation == "<=" and abs(float(np.dot(row.coeffs, w)) - row.rhs) <= tol
    )


def dump(lp: LpProblem) -> str:
    """Fixed-format text rendering of the program, for diffing in tests."""

    def fmt(values) -> str:
        return " ".join(f"{float(v):.12g}" for v in values)

    lines = [f"min: {fmt(lp.objective)}"]
    for row in lp.rows:
        lines.append(f"{row.label}: {fmt(row.coeffs)} {row.relation} {float(row.rhs):.12g}")
    return "\n".join(lines) + "\n"
