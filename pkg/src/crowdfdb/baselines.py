"""Comparison policies: uniform Random and density-Greedy assignment."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .model import AccuracyMatrix, Policy, Priors, diagonal_accuracies


class CapacityError(ValueError):
    """Greedy cannot place all tasks under the per-worker cap."""


def random_policy(n: int) -> Policy:
    """Every worker equally likely: weight 1/n each."""
    if n < 1:
        raise ValueError(f"need at least one worker, got {n}")
    return Policy(np.full(n, 1.0 / n))


@dataclass(frozen=True)
class GreedyPlan:
    """Per-worker task counts from the density-greedy fill.

    order lists worker indices by decreasing density (accuracy per unit
    fee), which is also the order tasks are handed out in.
    """

    counts: tuple[int, ...]
    order: tuple[int, ...]
    cap: int
    total_tasks: int

    def assignment_sequence(self) -> np.ndarray:
        """Worker index for each task slot, highest-density workers first."""
        return np.concatenate(
            [np.full(self.counts[i], i, dtype=int) for i in self.order if self.counts[i]]
        )


def greedy_plan(
    estimates: list[tuple[AccuracyMatrix, AccuracyMatrix]],
    costs: list[float] | np.ndarray,
    priors: Priors,
    beta: float,
    total_tasks: int,
) -> GreedyPlan:
    """Fill workers to floor(beta * T) in decreasing density order.

    Density is estimated expected accuracy divided by fee (infinite for a
    free worker); ties break toward the lower worker index.  Unlike the LP
    policy the greedy baseline must know the task count T in advance.
    """
    n = len(estimates)
    if total_tasks < 1:
        raise ValueError(f"total_tasks must be >= 1, got {total_tasks}")
    costs = np.asarray(costs, dtype=float)
    cap = int(math.floor(beta * total_tasks + 1e-9))
    if cap * n < total_tasks:
        raise CapacityError(
            f"cap floor(beta*T)={cap} over {n} workers cannot hold {total_tasks} tasks"
        )
    accuracy = diagonal_accuracies(estimates, priors)
    density = [
        math.inf if costs[i] == 0.0 else float(accuracy[i] / costs[i]) for i in range(n)
    ]
    order = sorted(range(n), key=lambda i: (-density[i], i))
    counts = [0] * n
    remaining = total_tasks
    for i in order:
        take = min(cap, remaining)
        counts[i] = take
        remaining -= take
        if remaining == 0:
            break
    return GreedyPlan(counts=tuple(counts), order=tuple(order), cap=cap, total_tasks=total_tasks)
