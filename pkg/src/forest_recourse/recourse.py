"""Discrete approximation (DA) feedback engine.

For a novice query the expert boxes are pruned to the parts reachable by
changing a single coordinate, each surviving box is sampled on a sparse
grid, and the representative with the most neighbours inside a lattice
ball of radius ``gamma`` is returned as the target.
"""
from __future__ import annotations

import math
from functools import lru_cache
from dataclasses import dataclass, replace
from time import perf_counter

import numpy as np
from scipy.spatial import cKDTree

from .actions import FeedbackAction, build_action
from .exceptions import AlreadyExpert, ConfigError, NoSolution
from .geometry import PartitionTable, RectBank, discretize_point


@dataclass(frozen=True)
class DAConfig:
    alpha: float = 0.5
    gamma: float = 2.0

    def __post_init__(self):
        if not 0 < self.alpha <= 1:
            raise ConfigError(f"alpha must be in (0, 1], got {self.alpha}")
        if not self.gamma >= 0:
            raise ConfigError(f"gamma must be >= 0, got {self.gamma}")


@dataclass(frozen=True, eq=False)
class PrunedRect:
    source: int  # row of the input rectangle
    free_dim: int | None
    lows: np.ndarray
    highs: np.ndarray

    def contains(self, p) -> bool:
        p = np.asarray(p)
        return bool(((self.lows < p) & (p <= self.highs)).all())


def _violations(lows, highs, q):
    inside = (lows < q) & (q <= highs)
    return inside, lows.shape[1] - inside.sum(axis=1)


def prune_rects(rects, q) -> list:
    """Drop boxes that ``q`` misses in two or more dimensions and pin every
    dimension ``q`` already satisfies to ``q``'s own partition."""
    bank = RectBank.from_rects(rects, len(q))
    q = np.asarray(q, dtype=np.int64)
    inside, viol = _violations(bank.lows, bank.highs, q)
    out = []
    for k in np.flatnonzero(viol <= 1):
        lows, highs = q - 1, q.copy()
        free = None
        if viol[k] == 1:
            free = int(np.argmin(inside[k]))
            lows[free], highs[free] = bank.lows[k, free], bank.highs[k, free]
        out.append(PrunedRect(int(k), free, lows, highs))
    return out


def representatives_per_dim(l: int, r: int, alpha: float) -> int:
    width = r - l
    if width < 1:
        raise ValueError(f"empty range ({l}, {r}]")
    if width <= 2:
        return width
    # round off float noise first: 0.7 * 10 must give 7, not 8
    return math.ceil(round(alpha * width, 9)) + 2


def dim_values(l: int, r: int, alpha: float) -> np.ndarray:
    """Representative partition indices of the range ``(l, r]``.

    Both ends are kept; the rest sit at equal steps between them, rounded
    half-up and deduplicated, so at most ``representatives_per_dim`` values.
    """
    return l + _offsets(r - l, alpha)


@lru_cache(maxsize=65536)
def _offsets(width: int, alpha: float) -> np.ndarray:
    n = representatives_per_dim(0, width, alpha)
    if n >= width:
        out = np.arange(1, width + 1, dtype=np.int64)
    else:
        # floor(1 + k(w-1)/(n-1) + 1/2) in integers, so exact halves round up
        k = np.arange(n, dtype=np.int64)
        out = np.unique(1 + (2 * k * (width - 1) + (n - 1)) // (2 * (n - 1)))
    out.flags.writeable = False
    return out


def select_representatives(pr: PrunedRect, alpha: float) -> np.ndarray:
    axes = [dim_values(int(lo), int(hi), alpha) for lo, hi in zip(pr.lows, pr.highs)]
    grid = np.meshgrid(*axes, indexing="ij")
    return np.stack([g.ravel() for g in grid], axis=1)


def neighbour_counts(points, gamma: float, weights=None):
    """Unique points, their multiplicities and neighbour counts within ``gamma``.

    A point's count is the number of *other* occurrences (duplicates
    included) at Euclidean distance <= gamma.
    """
    pts = np.asarray(points, dtype=np.int64)
    if pts.ndim != 2 or pts.shape[0] == 0:
        raise NoSolution("no candidate points")
    w = np.ones(pts.shape[0], dtype=np.int64) if weights is None else np.asarray(weights, dtype=np.int64)
    uniq, inv = _unique_rows(pts)
    w = np.bincount(inv, weights=w, minlength=uniq.shape[0]).astype(np.int64)
    counts = w - 1
    if uniq.shape[0] > 1:
        # integer lattice: squared distances are integers, a tiny slack makes
        # points exactly at gamma count
        pairs = cKDTree(uniq).query_pairs(gamma + 1e-9, output_type="ndarray")
        if pairs.size:
            i, j = pairs[:, 0], pairs[:, 1]
            n = uniq.shape[0]
            counts = counts + np.bincount(i, weights=w[j], minlength=n).astype(np.int64)
            counts = counts + np.bincount(j, weights=w[i], minlength=n).astype(np.int64)
    return uniq, w, counts


def _unique_rows(pts):
    """Lexicographically sorted unique rows and the inverse map."""
    order = np.lexsort(pts.T[::-1])
    srt = pts[order]
    new = np.ones(len(srt), dtype=bool)
    new[1:] = (srt[1:] != srt[:-1]).any(axis=1)
    group = np.cumsum(new) - 1
    inv = np.empty(len(pts), dtype=np.int64)
    inv[order] = group
    return srt[new], inv


def densest_center(points, gamma: float, weights=None) -> tuple:
    """Point with the most neighbours within ``gamma``.

    Ties go to the smaller total distance to all occurrences, then to the
    lexicographically smallest point.
    """
    uniq, w, counts = neighbour_counts(points, gamma, weights)
    best = np.flatnonzero(counts == counts.max())
    if best.size > 1:
        diff = uniq[best][:, None, :] - uniq[None, :, :]
        spread = np.sqrt((diff * diff).sum(axis=2)) @ w
        best = best[spread <= spread.min() + 1e-9]
    # rows are lexsorted, so the first index is the lexicographic minimum
    return tuple(int(v) for v in uniq[best[0]])


def pooled_candidates(bank: RectBank, q: np.ndarray, alpha: float):
    """Representatives of all pruned boxes, as unique points with multiplicities.

    After pruning every representative is ``q`` with at most one coordinate
    replaced, so the pool is tallied per axis instead of materialised.
    """
    inside, viol = _violations(bank.lows, bank.highs, q)
    n_home = int((viol == 0).sum())
    one = np.flatnonzero(viol == 1)
    if n_home == 0 and one.size == 0:
        raise NoSolution("no expert rectangle is reachable by changing one feature")
    points, weights = [], []
    if n_home:
        points.append(q[None, :])
        weights.append(np.array([n_home]))
    if one.size:
        free = np.argmin(inside[one], axis=1)
        lo, hi = bank.lows[one, free], bank.highs[one, free]
        span = int(bank.highs.max()) + 1
        vals = [_offsets(w, alpha) for w in (hi - lo).tolist()]
        sizes = np.fromiter((v.size for v in vals), dtype=np.int64, count=len(vals))
        flat = np.concatenate(vals) + np.repeat(lo + free * span, sizes)
        tally = np.bincount(flat, minlength=q.size * span)
        hit = np.flatnonzero(tally)
        axis, value = np.divmod(hit, span)
        block = np.repeat(q[None, :], hit.size, axis=0)
        block[np.arange(hit.size), axis] = value
        points.append(block)
        weights.append(tally[hit])
    return np.concatenate(points), np.concatenate(weights).astype(np.int64)


def formulate_feedback(forest, table: PartitionTable, rects, x, config: DAConfig = DAConfig()) -> FeedbackAction:
    """Single-feature feedback for a novice instance ``x``.

    Raises :class:`AlreadyExpert` if the forest already votes expert and
    :class:`NoSolution` if no expert box is one change away.
    """
    t0 = perf_counter()
    x = forest.check_x(x)
    f_before = forest._votes_unchecked(x) / forest.n_trees
    if f_before > 0.5:
        raise AlreadyExpert(f_before)
    bank = RectBank.from_rects(rects, forest.d)
    if len(bank) and (bank.labels != 1).any():
        raise ValueError("formulate_feedback expects expert rectangles only")
    q = discretize_point(x, table)
    points, weights = pooled_candidates(bank, q, config.alpha)
    center = densest_center(points, config.gamma, weights)
    action = build_action(forest, table, x, q, center, f_before, "da")
    return replace(action, elapsed=perf_counter() - t0)
