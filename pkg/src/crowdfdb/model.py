"""Core domain types: worker accuracy matrices, assignment policies, priors.

A worker is described by two 2x2 row-stochastic matrices, one per value of
the binary sensitive attribute z; entry [y, yhat] is the probability she
reports yhat on a task whose true label is y.  A policy is a probability
vector over workers, and its group-level accuracy matrices are the
policy-weighted mixtures of the workers' matrices.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np


@dataclass(frozen=True)
class Tolerances:
    """Fixed numerical tolerances shared across the package (see README).

    structural:     accuracy-matrix row sums
    policy_sum:     policy weight sums
    lp_feasibility: constraint residuals accepted from the LP solver
    lp_optimality:  reduced-cost threshold for simplex termination
    """

    structural: float = 1e-12
    policy_sum: float = 1e-9
    lp_feasibility: float = 1e-7
    lp_optimality: float = 1e-9


TOL = Tolerances()


class DimensionMismatchError(ValueError):
    """Policy length and worker count disagree."""


class FairnessKind(Enum):
    FPR_PARITY = "fpr"
    FNR_PARITY = "fnr"
    ERROR_RATE_PARITY = "error-rate"
    NONE = "none"


@dataclass(frozen=True, eq=False)
class AccuracyMatrix:
    """2x2 row-stochastic matrix; entry [y, yhat] = P(label yhat | truth y).

    Validated at construction: entries in [0, 1] and each row summing to 1
    within the structural tolerance.  Matrices are rejected, never silently
    renormalized, so estimation bugs surface instead of being washed out.
    """

    entries: np.ndarray

    def __post_init__(self) -> None:
        m = np.array(self.entries, dtype=float)
        if m.shape != (2, 2):
            raise ValueError(f"accuracy matrix must be 2x2, got shape {m.shape}")
        # NaN compares false against every bound, so check finiteness first
        if not np.all(np.isfinite(m)) or np.any(m < 0.0) or np.any(m > 1.0):
            raise ValueError(f"accuracy matrix entries must lie in [0, 1]: {m.tolist()}")
        sums = m.sum(axis=1)
        if np.any(np.abs(sums - 1.0) > TOL.structural):
            raise ValueError(f"accuracy matrix rows must sum to 1, got sums {sums.tolist()}")
        m.flags.writeable = False
        object.__setattr__(self, "entries", m)

    def __getitem__(self, index) -> float:
        return float(self.entries[index])

    def __eq__(self, other) -> bool:
        if not isinstance(other, AccuracyMatrix):
            return NotImplemented
        return bool(np.array_equal(self.entries, other.entries))

    def __hash__(self) -> int:
        return hash(self.entries.tobytes())

    @property
    def fpr(self) -> float:
        """P(label 1 | truth 0)."""
        return float(self.entries[0, 1])

    @property
    def fnr(self) -> float:
        """P(label 0 | truth 1)."""
        return float(self.entries[1, 0])

    @staticmethod
    def from_diagonals(correct_on_0: float, correct_on_1: float) -> "AccuracyMatrix":
        """Build from the two per-truth-label correctness probabilities."""
        return AccuracyMatrix(
            np.array(
                [
                    [correct_on_0, 1.0 - correct_on_0],
                    [1.0 - correct_on_1, correct_on_1],
                ]
            )
        )

    @staticmethod
    def identity() -> "AccuracyMatrix":
        return AccuracyMatrix(np.eye(2))


@dataclass(frozen=True)
class WorkerProfile:
    """One worker: per-group accuracy matrices plus her per-label fee."""

    id: str
    matrix_z0: AccuracyMatrix
    matrix_z1: AccuracyMatrix
    cost: float

    def __post_init__(self) -> None:
        if not (self.cost >= 0.0 and np.isfinite(self.cost)):
            raise ValueError(f"worker cost must be finite and >= 0, got {self.cost}")

    def matrix(self, z: int) -> AccuracyMatrix:
        if z == 0:
            return self.matrix_z0
        if z == 1:
            return self.matrix_z1
        raise ValueError(f"sensitive attribute must be 0 or 1, got {z}")


@dataclass(frozen=True, eq=False)
class Policy:
    """Stochastic selection vector: weights[i] = P(task goes to worker i)."""

    weights: np.ndarray

    def __post_init__(self) -> None:
        w = np.array(self.weights, dtype=float)
        if w.ndim != 1 or w.size == 0:
            raise ValueError("policy weights must be a nonempty 1-D vector")
        if not np.all(np.isfinite(w)) or np.any(w < 0.0) or np.any(w > 1.0):
            raise ValueError("policy weights must lie in [0, 1]")
        total = float(w.sum())
        if abs(total - 1.0) > TOL.policy_sum:
            raise ValueError(f"policy weights must sum to 1 within {TOL.policy_sum}, got {total!r}")
        w.flags.writeable = False
        object.__setattr__(self, "weights", w)

    def __len__(self) -> int:
        return int(self.weights.size)

    def __eq__(self, other) -> bool:
        if not isinstance(other, Policy):
            return NotImplemented
        return bool(np.array_equal(self.weights, other.weights))

    def __hash__(self) -> int:
        return hash(self.weights.tobytes())

    def entropy(self) -> float:
        """Shannon entropy of the selection distribution, in nats."""
        w = self.weights[self.weights > 0.0]
        return float(-(w * np.log(w)).sum())


@dataclass(frozen=True)
class Priors:
    """Known pool-level priors: P(Z=1) and P(Y=1 | Z=z) for each group."""

    p_z1: float
    p_y1_given_z0: float
    p_y1_given_z1: float

    def __post_init__(self) -> None:
        for name in ("p_z1", "p_y1_given_z0", "p_y1_given_z1"):
            v = getattr(self, name)
            if not (0.0 <= v <= 1.0):
                raise ValueError(f"prior {name} must lie in [0, 1], got {v}")

    def p_z(self, z: int) -> float:
        return self.p_z1 if z == 1 else 1.0 - self.p_z1

    def p_y(self, z: int, y: int) -> float:
        p1 = self.p_y1_given_z1 if z == 1 else self.p_y1_given_z0
        return p1 if y == 1 else 1.0 - p1

    def type_weight(self, z: int, y: int) -> float:
        """Joint probability that a random task has group z and truth y."""
        return self.p_z(z) * self.p_y(z, y)


@dataclass(frozen=True)
class PolicyAccuracy:
    """Group-level accuracy matrices induced by a policy."""

    matrix_z0: AccuracyMatrix
    matrix_z1: AccuracyMatrix

    def matrix(self, z: int) -> AccuracyMatrix:
        return self.matrix_z1 if z == 1 else self.matrix_z0


def _check_dimensions(policy: Policy, workers: list[WorkerProfile]) -> None:
    if len(policy) != len(workers):
        raise DimensionMismatchError(
            f"policy has {len(policy)} weights but there are {len(workers)} workers"
        )


def compose_policy_accuracy(policy: Policy, workers: list[WorkerProfile]) -> PolicyAccuracy:
    """Mixture of the workers' accuracy matrices under the policy weights.

    The weighted sum is divided by the exact weight total so the result is
    row-stochastic to machine precision even though policy sums are only
    required to be 1 within the policy_sum tolerance.
    """
    _check_dimensions(policy, workers)
    w = policy.weights
    total = float(w.sum())
    out = []
    for z in (0, 1):
        stacked = np.stack([wk.matrix(z).entries for wk in workers])
        mixed = np.tensordot(w, stacked, axes=1) / total
        out.append(AccuracyMatrix(np.clip(mixed, 0.0, 1.0)))
    return PolicyAccuracy(matrix_z0=out[0], matrix_z1=out[1])


def diagonal_accuracies(
    matrix_pairs: list[tuple[AccuracyMatrix, AccuracyMatrix]], priors: Priors
) -> np.ndarray:
    """Per-worker expected accuracy on a random task, as a vector.

    Entry i is sum_z P(Z=z) * sum_y P_z(Y=y) * A_iz[y, y]; this is both the
    negated LP objective coefficient and the greedy density numerator.
    """
    diag = np.array(
        [
            [[pair[z][y, y] for y in (0, 1)] for z in (0, 1)]
            for pair in matrix_pairs
        ]
    )  # shape (n, z, y)
    weight = np.array([[priors.type_weight(z, y) for y in (0, 1)] for z in (0, 1)])
    return np.tensordot(diag, weight, axes=([1, 2], [0, 1]))


def expected_accuracy(policy: Policy, workers: list[WorkerProfile], priors: Priors) -> float:
    """Probability that a label collected under the policy is correct."""
    _check_dimensions(policy, workers)
    per_worker = diagonal_accuracies([(w.matrix_z0, w.matrix_z1) for w in workers], priors)
    return float(np.dot(policy.weights, per_worker))


def fairness_gap(pa: PolicyAccuracy, kind: FairnessKind) -> float:
    """Absolute between-group error-rate difference of a policy.

    FPR parity compares entries [0, 1], FNR parity entries [1, 0], and
    error-rate parity takes the larger of the two gaps.
    """
    fpr_gap = abs(pa.matrix_z0.fpr - pa.matrix_z1.fpr)
    fnr_gap = abs(pa.matrix_z0.fnr - pa.matrix_z1.fnr)
    if kind is FairnessKind.FPR_PARITY:
        return fpr_gap
    if kind is FairnessKind.FNR_PARITY:
        return fnr_gap
    if kind is FairnessKind.ERROR_RATE_PARITY:
        return max(fpr_gap, fnr_gap)
    raise ValueError(f"fairness_gap is undefined for kind {kind}")


def sample_label(worker: WorkerProfile, z: int, y: int, rng: np.random.Generator) -> int:
    """One simulated label from the worker's accuracy matrix row (z, y)."""
    if z not in (0, 1) or y not in (0, 1):
        raise ValueError(f"z and y must be 0 or 1, got z={z} y={y}")
    p_one = worker.matrix(z)[y, 1]
    return int(rng.random() < p_one)
