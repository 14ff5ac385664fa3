"""Worker accuracy estimation from gold tasks.

Each worker answers n_gold_per_type tasks of every (z, y) type; the
fraction answered correctly becomes the matching diagonal entry of her
estimated matrix and the off-diagonal is its complement.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import AccuracyMatrix, WorkerProfile
from .rng import stream

# fixed type order used for simulation draws and file columns
TYPE_ORDER: tuple[tuple[int, int], ...] = ((0, 0), (0, 1), (1, 0), (1, 1))


class EstimationError(ValueError):
    """Tally cannot produce an estimate (zero attempted count)."""


@dataclass(frozen=True)
class GoldPhaseConfig:
    """Gold-phase settings.

    smoothing adds one success and one failure to every per-type tally
    (so estimates stay interior); off by default because degenerate 0/1
    estimates keep the LP well-posed.
    """

    n_gold_per_type: int
    smoothing: bool = False

    def __post_init__(self) -> None:
        if self.n_gold_per_type < 1:
            raise ValueError(f"n_gold_per_type must be >= 1, got {self.n_gold_per_type}")


@dataclass(frozen=True)
class GoldResponseTally:
    """Attempted/correct counts per (z, y) task type for one worker."""

    attempted: tuple[int, int, int, int]  # ordered as TYPE_ORDER
    correct: tuple[int, int, int, int]

    def __post_init__(self) -> None:
        for (z, y), a, c in zip(TYPE_ORDER, self.attempted, self.correct):
            if a < 0 or c < 0 or c > a:
                raise ValueError(
                    f"tally for type (z={z}, y={y}) needs 0 <= correct <= attempted, "
                    f"got correct={c} attempted={a}"
                )

    def get(self, z: int, y: int) -> tuple[int, int]:
        idx = TYPE_ORDER.index((z, y))
        return self.attempted[idx], self.correct[idx]


def estimate_matrices(
    tally: GoldResponseTally, smoothing: bool = False
) -> tuple[AccuracyMatrix, AccuracyMatrix]:
    """Estimated (z=0, z=1) accuracy matrices from a gold tally."""
    diag = {}
    for z, y in TYPE_ORDER:
        attempted, correct = tally.get(z, y)
        if attempted == 0:
            raise EstimationError(f"no gold tasks attempted for type (z={z}, y={y})")
        if smoothing:
            diag[(z, y)] = (correct + 1) / (attempted + 2)
        else:
            diag[(z, y)] = correct / attempted
    return (
        AccuracyMatrix.from_diagonals(diag[(0, 0)], diag[(0, 1)]),
        AccuracyMatrix.from_diagonals(diag[(1, 0)], diag[(1, 1)]),
    )


def simulate_gold_tally(
    worker: WorkerProfile, n_gold_per_type: int, rng: np.random.Generator
) -> GoldResponseTally:
    """Draw n_gold_per_type i.i.d. responses per type from the true matrices.

    A response to a type-(z, y) task is correct when the sampled label
    equals y; draws consume the stream in TYPE_ORDER.
    """
    attempted = []
    correct = []
    for z, y in TYPE_ORDER:
        p_one = worker.matrix(z)[y, 1]
        labels = rng.random(n_gold_per_type) < p_one
        attempted.append(n_gold_per_type)
        correct.append(int((labels == bool(y)).sum()))
    return GoldResponseTally(attempted=tuple(attempted), correct=tuple(correct))


def run_gold_phase(
    workers: list[WorkerProfile], cfg: GoldPhaseConfig, seed: int
) -> list[tuple[AccuracyMatrix, AccuracyMatrix]]:
    """Simulate the gold phase and estimate every worker's matrices.

    Worker i draws from the derived stream (seed, "gold", i), so per-worker
    phases can run in any order (or in parallel) with results identical to
    sequential execution.
    """
    if not workers:
        raise ValueError("worker list must be nonempty")
    estimates = []
    for i, worker in enumerate(workers):
        rng = stream(seed, "gold", i)
        tally = simulate_gold_tally(worker, cfg.n_gold_per_type, rng)
        estimates.append(estimate_matrices(tally, smoothing=cfg.smoothing))
    return estimates
