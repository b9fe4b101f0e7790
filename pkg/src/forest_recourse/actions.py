"""The answer to a feedback query and its JSON form."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .geometry import PartitionTable


@dataclass(frozen=True, eq=False)
class FeedbackAction:
    """A change of at most one feature.

    ``feature`` is ``None`` when the best move is to keep the instance as it
    is; ``target`` is the full changed vector ``x_f``.
    """

    feature: int | None
    feature_name: str | None
    direction: str  # "increase" | "decrease" | "none"
    target_value: float | None
    target_point: tuple
    target: np.ndarray
    achieved_f: float
    f_before: float
    method: str = ""
    elapsed: float = 0.0
    source: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        if self.source is not None:
            changed = np.flatnonzero(self.target != self.source)
            if changed.size > 1:
                raise AssertionError(f"action changes {changed.size} features; at most one is allowed")
            if changed.size == 1 and (self.feature is None or changed[0] != self.feature):
                raise AssertionError("changed coordinate does not match the action's feature")
            if self.feature is not None:
                delta = self.target_value - self.source[self.feature]
                expect = "increase" if delta > 0 else "decrease" if delta < 0 else "none"
                if expect != self.direction:
                    raise AssertionError(f"direction {self.direction!r} inconsistent with change {delta}")

    @property
    def success(self) -> bool:
        return self.achieved_f > 0.5

    def describe(self) -> str:
        if self.feature is None:
            return "no change"
        return f"{self.direction} {self.feature_name} to {self.target_value:.4g}"

    def to_json(self) -> dict:
        return {
            "feature": self.feature_name,
            "direction": self.direction,
            "target": self.target_value,
            "f_before": self.f_before,
            "f_after": self.achieved_f,
            "micros": int(round(self.elapsed * 1e6)),
        }


def build_action(forest, table: PartitionTable, x: np.ndarray, q: np.ndarray, target_point,
                 f_before: float, method: str, elapsed: float = 0.0) -> FeedbackAction:
    """Turn a target lattice point that differs from ``q`` in <= 1 place into an action."""
    target_point = np.asarray(target_point, dtype=np.int64)
    diff = np.flatnonzero(target_point != q)
    if diff.size > 1:
        raise AssertionError(f"target point differs from the query in {diff.size} coordinates")
    x = np.asarray(x, dtype=float)
    if diff.size == 0:
        return FeedbackAction(None, None, "none", None, tuple(int(v) for v in q), x.copy(),
                              f_before, f_before, method, elapsed, x)
    i = int(diff[0])
    value = float(table.midpoints[i][target_point[i] - 1])
    x_f = x.copy()
    x_f[i] = value
    achieved = forest._votes_unchecked(x_f) / forest.n_trees
    direction = "increase" if value > x[i] else "decrease"
    return FeedbackAction(i, forest.feature_names[i], direction, value, tuple(int(v) for v in target_point),
                          x_f, float(achieved), f_before, method, elapsed, x)
