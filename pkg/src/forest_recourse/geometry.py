"""Integer discretization of a forest's feature space.

Every split threshold on feature ``i`` cuts its domain; the resulting
``m_i`` intervals are numbered 1..m_i and are left-open/right-closed,
matching the ``x <= t goes left`` rule of the trees. Leaves become
axis-aligned integer boxes ``{l_i < p_i <= r_i}``.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .exceptions import DomainError, SchemaError
from .forest import Leaf, RandomForest, Split, bounds_of


@dataclass(frozen=True, eq=False)
class PartitionTable:
    thresholds: tuple  # per feature: sorted unique float array
    lower: np.ndarray
    upper: np.ndarray
    names: tuple = ()

    @property
    def d(self) -> int:
        return len(self.thresholds)

    @property
    def counts(self) -> np.ndarray:
        """Partition count ``m_i`` of every feature."""
        return np.array([t.size + 1 for t in self.thresholds], dtype=np.int64)

    @cached_property
    def midpoints(self) -> tuple:
        """Per feature, the undiscretized value of every partition (index j-1)."""
        out = []
        for i in range(self.d):
            e = self.edges(i)
            out.append(0.5 * (e[:-1] + e[1:]))
        return tuple(out)

    def edges(self, i: int) -> np.ndarray:
        return np.concatenate(([self.lower[i]], self.thresholds[i], [self.upper[i]]))

    def interval(self, i: int, j: int) -> tuple:
        e = self.edges(i)
        return float(e[j - 1]), float(e[j])

    def __eq__(self, other):
        if not isinstance(other, PartitionTable) or other.d != self.d:
            return NotImplemented
        return (all(np.array_equal(a, b) for a, b in zip(self.thresholds, other.thresholds))
                and np.array_equal(self.lower, other.lower) and np.array_equal(self.upper, other.upper))

    __hash__ = None

    def to_dict(self) -> dict:
        return {"features": [
            {"name": n, "lower": float(lo), "upper": float(hi), "thresholds": [float(t) for t in th]}
            for n, lo, hi, th in zip(self.names, self.lower, self.upper, self.thresholds)
        ]}


def build_partition_table(forest: RandomForest) -> PartitionTable:
    cuts = [set() for _ in range(forest.d)]
    for root in forest.trees:
        stack = [root]
        while stack:
            nd = stack.pop()
            if isinstance(nd, Split):
                cuts[nd.feature_index].add(nd.threshold)
                stack.extend((nd.left, nd.right))
    lo, hi = bounds_of(forest.schema)
    return PartitionTable(
        tuple(np.array(sorted(c), dtype=float) for c in cuts), lo, hi, tuple(forest.feature_names)
    )


def discretize_point(x, table: PartitionTable) -> np.ndarray:
    """Partition index (1-based) of each coordinate of ``x``."""
    x = np.asarray(x, dtype=float)
    if x.shape != (table.d,):
        raise SchemaError(f"expected a vector of {table.d} features, got shape {x.shape}")
    out_of_domain = (x < table.lower) | (x > table.upper)
    if out_of_domain.any():
        i = int(np.argmax(out_of_domain))
        raise DomainError(f"feature {i} value {x[i]!r} outside [{table.lower[i]}, {table.upper[i]}]")
    # side="left": a value equal to t_j belongs to partition j
    return np.array([np.searchsorted(t, v, side="left") + 1 for t, v in zip(table.thresholds, x)],
                    dtype=np.int64)


def undiscretize_value(feature: int, partition: int, table: PartitionTable) -> float:
    """Real value standing in for a partition: the midpoint of its interval."""
    if not 0 <= feature < table.d:
        raise IndexError(f"feature index {feature} out of range [0, {table.d})")
    m = table.thresholds[feature].size + 1
    if not 1 <= partition <= m:
        raise IndexError(f"partition {partition} out of range [1, {m}] for feature {feature}")
    a, b = table.interval(feature, partition)
    return 0.5 * (a + b)


def undiscretize_point(p, table: PartitionTable) -> np.ndarray:
    return np.array([undiscretize_value(i, int(j), table) for i, j in enumerate(p)])


@dataclass(frozen=True, eq=False)
class IntRect:
    """Integer box ``{lows[i] < p_i <= highs[i]}`` from one leaf."""

    lows: tuple
    highs: tuple
    label: int
    tree_index: int

    def __post_init__(self):
        object.__setattr__(self, "lows", tuple(int(v) for v in self.lows))
        object.__setattr__(self, "highs", tuple(int(v) for v in self.highs))

    def __eq__(self, other):
        if not isinstance(other, IntRect):
            return NotImplemented
        return (self.lows, self.highs, self.label, self.tree_index) == (
            other.lows, other.highs, other.label, other.tree_index)

    def __hash__(self):
        return hash((self.lows, self.highs, self.label, self.tree_index))

    @property
    def d(self) -> int:
        return len(self.lows)

    def contains(self, p) -> bool:
        return all(lo < v <= hi for lo, v, hi in zip(self.lows, p, self.highs))

    def size(self) -> int:
        return int(np.prod([h - lo for lo, h in zip(self.lows, self.highs)], dtype=object))


class RectBank:
    """Rectangles of a forest held as stacked ``(R, d)`` bound arrays.

    Iterating yields :class:`IntRect` objects; the arrays are what the
    per-query code works on.
    """

    def __init__(self, lows, highs, labels, trees):
        self.lows = np.asarray(lows, dtype=np.int64)
        self.highs = np.asarray(highs, dtype=np.int64)
        self.labels = np.asarray(labels, dtype=np.int64)
        self.trees = np.asarray(trees, dtype=np.int64)

    @classmethod
    def from_rects(cls, rects, d: int | None = None) -> "RectBank":
        if isinstance(rects, RectBank):
            return rects
        rects = list(rects)
        if not rects:
            d = d or 0
            return cls(np.zeros((0, d)), np.zeros((0, d)), [], [])
        return cls([r.lows for r in rects], [r.highs for r in rects],
                   [r.label for r in rects], [r.tree_index for r in rects])

    def __len__(self):
        return self.labels.size

    def __getitem__(self, k):
        return IntRect(tuple(self.lows[k]), tuple(self.highs[k]), int(self.labels[k]), int(self.trees[k]))

    def __iter__(self):
        return (self[k] for k in range(len(self)))

    def with_label(self, label: int) -> "RectBank":
        keep = self.labels == label
        return RectBank(self.lows[keep], self.highs[keep], self.labels[keep], self.trees[keep])

    def count_containing(self, p) -> int:
        p = np.asarray(p)
        return int(((self.lows < p) & (p <= self.highs)).all(axis=1).sum())


def _index_of(table: PartitionTable, feature: int, threshold: float) -> int:
    th = table.thresholds[feature]
    j = int(np.searchsorted(th, threshold))
    if j >= th.size or th[j] != threshold:
        raise ValueError(f"threshold {threshold} on feature {feature} is not in the partition table")
    return j + 1


def extract_rects(forest: RandomForest, table: PartitionTable) -> RectBank:
    """One integer box per leaf of the forest, both labels."""
    m = table.counts
    lows, highs, labels, trees = [], [], [], []
    for t, root in enumerate(forest.trees):
        stack = [(root, np.zeros_like(m), m.copy())]
        while stack:
            nd, lo, hi = stack.pop()
            if isinstance(nd, Leaf):
                if (hi <= lo).any():
                    raise ValueError(f"tree {t} has a leaf whose path is unsatisfiable")
                lows.append(lo); highs.append(hi); labels.append(nd.label); trees.append(t)
                continue
            f, j = nd.feature_index, _index_of(table, nd.feature_index, nd.threshold)
            lhi = hi.copy(); lhi[f] = min(hi[f], j)
            rlo = lo.copy(); rlo[f] = max(lo[f], j)
            stack.append((nd.right, rlo, hi))
            stack.append((nd.left, lo, lhi))
    if not lows:
        return RectBank.from_rects([], forest.d)
    return RectBank(np.array(lows), np.array(highs), labels, trees)


def extract_expert_rects(forest: RandomForest, table: PartitionTable) -> RectBank:
    return extract_rects(forest, table).with_label(1)


def enumerate_points(rect: IntRect, cap: int = 100_000) -> list:
    """Every lattice point of ``rect``; refuses boxes with more than ``cap`` points."""
    if rect.size() > cap:
        raise ValueError(f"rectangle holds {rect.size()} points, more than cap={cap}")
    axes = [range(lo + 1, hi + 1) for lo, hi in zip(rect.lows, rect.highs)]
    return [tuple(p) for p in itertools.product(*axes)]
