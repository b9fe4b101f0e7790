"""Reference feedback methods: random choices and the exhaustive oracle."""
from __future__ import annotations

import enum
from dataclasses import replace
from time import perf_counter

import numpy as np

from .actions import FeedbackAction, build_action
from .geometry import PartitionTable, discretize_point


class MethodId(str, enum.Enum):
    DA = "da"
    RAND_RAND = "rand-rand"
    RAND_ITER = "rand-iter"
    ITER_ITER = "iter-iter"

    @classmethod
    def parse(cls, name: str) -> "MethodId":
        try:
            return cls(name.strip().lower().replace("_", "-"))
        except ValueError:
            raise ValueError(f"unknown method {name!r}; choose from {[m.value for m in cls]}") from None


def _start(forest, table, x):
    x = forest.check_x(x)
    q = discretize_point(x, table)
    return x, q, forest._votes_unchecked(x) / forest.n_trees


def _best_partition(forest, table: PartitionTable, x: np.ndarray, i: int):
    """Best partition of feature ``i`` with all other features held, one
    forest evaluation per candidate. Ties keep the lowest partition."""
    xc = x.copy()
    best_j, best_votes = 0, -1
    for j, v in enumerate(table.midpoints[i], start=1):
        xc[i] = v
        votes = forest._votes_unchecked(xc)
        if votes > best_votes:
            best_j, best_votes = j, votes
    return best_j, best_votes


def rand_rand(forest, table: PartitionTable, x, rng_seed) -> FeedbackAction:
    t0 = perf_counter()
    x, q, f0 = _start(forest, table, x)
    rng = np.random.default_rng(rng_seed)
    i = int(rng.integers(table.d))
    j = int(rng.integers(1, table.thresholds[i].size + 2))
    target = q.copy()
    target[i] = j
    action = build_action(forest, table, x, q, target, f0, MethodId.RAND_RAND.value)
    return replace(action, elapsed=perf_counter() - t0)


def rand_iter(forest, table: PartitionTable, x, rng_seed) -> FeedbackAction:
    t0 = perf_counter()
    x, q, f0 = _start(forest, table, x)
    rng = np.random.default_rng(rng_seed)
    i = int(rng.integers(table.d))
    j, _ = _best_partition(forest, table, x, i)
    target = q.copy()
    target[i] = j
    action = build_action(forest, table, x, q, target, f0, MethodId.RAND_ITER.value)
    return replace(action, elapsed=perf_counter() - t0)


def iter_iter(forest, table: PartitionTable, x) -> FeedbackAction:
    """Exact optimum over every single-feature partition change.

    Ties go to the lowest feature index, then the lowest partition.
    """
    t0 = perf_counter()
    x, q, f0 = _start(forest, table, x)
    best = (-1, 0, 0)
    for i in range(table.d):
        j, votes = _best_partition(forest, table, x, i)
        if votes > best[0]:
            best = (votes, i, j)
    _, i, j = best
    target = q.copy()
    target[i] = j
    action = build_action(forest, table, x, q, target, f0, MethodId.ITER_ITER.value)
    return replace(action, elapsed=perf_counter() - t0)


def candidate_count(table: PartitionTable) -> int:
    """Number of forest evaluations ``iter_iter`` performs."""
    return int(table.counts.sum())
