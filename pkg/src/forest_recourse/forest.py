"""Random forest classifier over numeric feature vectors.

Trees are CART with Gini impurity; each tree sees a bootstrap sample and a
random subset of the features. The forest output is a hard vote: the
fraction of trees whose reached leaf is labelled expert (1).
"""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field, replace
from functools import cached_property
from typing import Iterable, NamedTuple, Sequence, Union

import numpy as np

from .exceptions import (
    ConfigError,
    DegenerateTrainingSet,
    DomainError,
    ForestFormatError,
    SchemaError,
)


@dataclass(frozen=True)
class FeatureSpec:
    name: str
    lower: float
    upper: float

    def __post_init__(self):
        if not self.lower < self.upper:
            raise SchemaError(f"feature {self.name!r}: need lower < upper, got [{self.lower}, {self.upper}]")


def check_schema(schema: Sequence[FeatureSpec]) -> None:
    names = [s.name for s in schema]
    if len(set(names)) != len(names):
        raise SchemaError(f"duplicate feature names in schema: {names}")
    if not names:
        raise SchemaError("schema has no features")


class Instance(NamedTuple):
    features: np.ndarray
    label: int
    group: str


@dataclass
class Dataset:
    """Labelled instances stored column-wise.

    ``X`` is ``(n, d)`` float, ``y`` is ``(n,)`` in {0, 1} (1 = expert) and
    ``groups`` holds the cross-validation group of each row.
    """

    schema: list
    X: np.ndarray
    y: np.ndarray
    groups: np.ndarray

    def __post_init__(self):
        check_schema(self.schema)
        self.X = np.asarray(self.X, dtype=float)
        self.y = np.asarray(self.y, dtype=np.int64)
        self.groups = np.asarray(self.groups, dtype=object)
        if self.X.ndim != 2 or self.X.shape[1] != len(self.schema):
            raise SchemaError(f"expected {len(self.schema)} feature columns, got shape {self.X.shape}")
        n = self.X.shape[0]
        if n < 1:
            raise SchemaError("dataset is empty")
        if self.y.shape != (n,) or self.groups.shape != (n,):
            raise SchemaError("labels/groups length does not match the number of rows")
        if not np.isin(self.y, (0, 1)).all():
            raise SchemaError("labels must be 0 or 1")
        lo, hi = bounds_of(self.schema)
        bad = (self.X < lo) | (self.X > hi)
        if bad.any():
            row, col = np.argwhere(bad)[0]
            raise DomainError(
                f"row {row}: {self.schema[col].name}={self.X[row, col]!r} outside [{lo[col]}, {hi[col]}]"
            )

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def d(self) -> int:
        return self.X.shape[1]

    def __len__(self):
        return self.n

    def instances(self) -> Iterable[Instance]:
        for row, label, group in zip(self.X, self.y, self.groups):
            yield Instance(row, int(label), group)

    def subset(self, rows) -> "Dataset":
        return Dataset(self.schema, self.X[rows], self.y[rows], self.groups[rows])

    @classmethod
    def from_instances(cls, schema, instances: Iterable[Instance]) -> "Dataset":
        instances = list(instances)
        if not instances:
            raise SchemaError("dataset is empty")
        X = np.array([np.asarray(i.features, dtype=float) for i in instances])
        return cls(schema, X, [i.label for i in instances], [i.group for i in instances])


def bounds_of(schema: Sequence[FeatureSpec]):
    lo = np.array([s.lower for s in schema], dtype=float)
    hi = np.array([s.upper for s in schema], dtype=float)
    return lo, hi


def write_dataset_csv(dataset: Dataset) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow([f"f_{s.name}" for s in dataset.schema] + ["label", "group"])
    for row, label, group in zip(dataset.X, dataset.y, dataset.groups):
        w.writerow([repr(float(v)) for v in row] + [int(label), group])
    return buf.getvalue()


def read_dataset_csv(text: str, schema: Sequence[FeatureSpec] | None = None) -> Dataset:
    """Parse the dataset CSV format.

    Without an explicit ``schema`` the feature domains are taken as the
    observed column ranges.
    """
    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise SchemaError("empty CSV: missing header row") from None
    if len(header) < 3 or header[-2:] != ["label", "group"]:
        raise SchemaError("CSV header must be f_<name>,...,label,group")
    names = []
    for col in header[:-2]:
        if not col.startswith("f_") or len(col) == 2:
            raise SchemaError(f"feature column {col!r} must be named f_<name>")
        names.append(col[2:])
    d = len(names)
    X, y, groups = [], [], []
    for lineno, row in enumerate(reader, start=2):
        if not row:
            continue
        if len(row) != d + 2:
            raise SchemaError(f"row {lineno}: expected {d + 2} fields, got {len(row)}")
        try:
            X.append([float(v) for v in row[:d]])
            label = int(row[d])
        except ValueError as e:
            raise SchemaError(f"row {lineno}: {e}") from None
        if label not in (0, 1):
            raise SchemaError(f"row {lineno}: label must be 0 or 1, got {label}")
        if not all(math.isfinite(v) for v in X[-1]):
            raise SchemaError(f"row {lineno}: non-finite feature value")
        y.append(label)
        groups.append(row[d + 1])
    if not X:
        raise SchemaError("CSV has no data rows")
    X = np.array(X)
    if schema is None:
        lo, hi = X.min(axis=0), X.max(axis=0)
        # constant columns still need a non-empty domain
        hi = np.where(hi > lo, hi, lo + 1.0)
        schema = [FeatureSpec(n, float(a), float(b)) for n, a, b in zip(names, lo, hi)]
    elif [s.name for s in schema] != names:
        raise SchemaError(f"CSV columns {names} do not match schema {[s.name for s in schema]}")
    return Dataset(list(schema), X, y, groups)


# --------------------------------------------------------------------------
# trees


@dataclass(frozen=True)
class Leaf:
    label: int
    expert_fraction: float
    sample_count: int


@dataclass(frozen=True)
class Split:
    feature_index: int
    threshold: float
    left: "Node"
    right: "Node"


Node = Union[Split, Leaf]


def make_leaf(expert_fraction: float, sample_count: int) -> Leaf:
    # ties go to novice
    return Leaf(int(expert_fraction > 0.5), float(expert_fraction), int(sample_count))


def iter_nodes(node: Node):
    stack = [node]
    while stack:
        nd = stack.pop()
        yield nd
        if isinstance(nd, Split):
            stack.append(nd.right)
            stack.append(nd.left)


def tree_depth(node: Node) -> int:
    if isinstance(node, Leaf):
        return 0
    return 1 + max(tree_depth(node.left), tree_depth(node.right))


@dataclass(frozen=True)
class TrainConfig:
    n_trees: int = 100
    max_depth: int = 5
    features_per_tree: int | None = None  # None -> ceil(sqrt(d))
    bootstrap: bool = True
    min_leaf_samples: int = 1
    seed: int = 0

    def resolved(self, d: int) -> "TrainConfig":
        k = self.features_per_tree if self.features_per_tree is not None else math.ceil(math.sqrt(d))
        cfg = replace(self, features_per_tree=k)
        cfg.validate(d)
        return cfg

    def validate(self, d: int | None = None) -> None:
        if self.n_trees < 1:
            raise ConfigError("n_trees must be >= 1")
        if self.max_depth < 1:
            raise ConfigError("max_depth must be >= 1")
        if self.min_leaf_samples < 1:
            raise ConfigError("min_leaf_samples must be >= 1")
        k = self.features_per_tree
        if k is not None and (k < 1 or (d is not None and k > d)):
            raise ConfigError(f"features_per_tree must be in [1, d], got {k}")
        if not 0 <= self.seed < 2**64:
            raise ConfigError("seed must be a 64-bit unsigned integer")


@dataclass(frozen=True, eq=True)
class RandomForest:
    trees: tuple
    schema: tuple
    config: TrainConfig = field(default_factory=TrainConfig)

    def __post_init__(self):
        object.__setattr__(self, "trees", tuple(self.trees))
        object.__setattr__(self, "schema", tuple(self.schema))
        if not self.trees:
            raise ConfigError("a forest needs at least one tree")
        check_schema(self.schema)
        lo, hi = bounds_of(self.schema)
        for t, root in enumerate(self.trees):
            for nd in iter_nodes(root):
                if isinstance(nd, Split):
                    f = nd.feature_index
                    if not 0 <= f < len(self.schema):
                        raise SchemaError(f"tree {t}: split on feature {f} but d = {len(self.schema)}")
                    if not lo[f] < nd.threshold < hi[f]:
                        raise DomainError(f"tree {t}: threshold {nd.threshold} not inside the domain of feature {f}")

    @property
    def n_trees(self) -> int:
        return len(self.trees)

    @property
    def d(self) -> int:
        return len(self.schema)

    @property
    def feature_names(self) -> list:
        return [s.name for s in self.schema]

    @cached_property
    def _flat(self):
        # All trees in one node table. A leaf points at itself with an
        # infinite threshold, so descending a fixed number of levels is safe.
        feat, thr, left, right, vote, roots = [], [], [], [], [], []
        for root in self.trees:
            roots.append(len(feat))
            pending = [(root, len(feat))]
            feat.append(0); thr.append(0.0); left.append(0); right.append(0); vote.append(0)
            while pending:
                nd, i = pending.pop()
                if isinstance(nd, Leaf):
                    feat[i], thr[i], left[i], right[i], vote[i] = 0, np.inf, i, i, nd.label
                    continue
                li, ri = len(feat), len(feat) + 1
                feat.extend((0, 0)); thr.extend((0.0, 0.0)); left.extend((0, 0))
                right.extend((0, 0)); vote.extend((0, 0))
                feat[i], thr[i], left[i], right[i] = nd.feature_index, nd.threshold, li, ri
                pending.append((nd.left, li))
                pending.append((nd.right, ri))
        depth = max(tree_depth(r) for r in self.trees)
        return (np.array(feat, dtype=np.intp), np.array(thr), np.array(left, dtype=np.intp),
                np.array(right, dtype=np.intp), np.array(vote, dtype=np.int64),
                np.array(roots, dtype=np.intp), depth)

    def check_x(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape != (self.d,):
            raise SchemaError(f"expected a vector of {self.d} features, got shape {x.shape}")
        return x

    def votes(self, x) -> int:
        """Number of trees voting expert for a single instance."""
        return int(self._votes_unchecked(self.check_x(x)))

    def _votes_unchecked(self, x: np.ndarray) -> int:
        feat, thr, left, right, vote, idx, depth = self._flat
        for _ in range(depth):
            idx = np.where(x[feat[idx]] <= thr[idx], left[idx], right[idx])
        return vote[idx].sum()

    def predict_proba(self, x) -> float:
        """Fraction of trees voting expert for ``x``."""
        return self.votes(x) / self.n_trees

    def predict_proba_many(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if X.ndim != 2 or X.shape[1] != self.d:
            raise SchemaError(f"expected an (n, {self.d}) array, got shape {X.shape}")
        feat, thr, left, right, vote, roots, depth = self._flat
        rows = np.arange(X.shape[0])[:, None]
        idx = np.broadcast_to(roots, (X.shape[0], roots.size))
        for _ in range(depth):
            idx = np.where(X[rows, feat[idx]] <= thr[idx], left[idx], right[idx])
        return vote[idx].sum(axis=1) / self.n_trees

    def predict(self, X) -> np.ndarray:
        return (self.predict_proba_many(X) > 0.5).astype(np.int64)

    def head(self, n_trees: int) -> "RandomForest":
        """Forest made of the first ``n_trees`` trees.

        Trees draw from independent per-index seed streams, so this equals a
        forest trained with ``n_trees`` and the same seed.
        """
        if not 1 <= n_trees <= self.n_trees:
            raise ConfigError(f"n_trees must be in [1, {self.n_trees}]")
        return RandomForest(self.trees[:n_trees], self.schema, replace(self.config, n_trees=n_trees))


def predict_proba(forest: RandomForest, x) -> float:
    return forest.predict_proba(x)


# --------------------------------------------------------------------------
# training


def _gini_scan(xs, ys, min_leaf):
    """Best threshold on one feature. Returns (weighted gini, threshold) or None."""
    order = np.argsort(xs, kind="stable")
    xs, ys = xs[order], ys[order]
    n = xs.size
    left_n = np.arange(1, n)
    left_pos = np.cumsum(ys)[:-1]
    right_n = n - left_n
    right_pos = ys.sum() - left_pos
    ok = (xs[:-1] < xs[1:]) & (left_n >= min_leaf) & (right_n >= min_leaf)
    if not ok.any():
        return None
    pl, pr = left_pos / left_n, right_pos / right_n
    score = (left_n * 2 * pl * (1 - pl) + right_n * 2 * pr * (1 - pr)) / n
    score = np.where(ok, score, np.inf)
    k = int(np.argmin(score))  # first minimum = lowest threshold
    t = 0.5 * (xs[k] + xs[k + 1])
    if not xs[k] <= t < xs[k + 1]:
        t = xs[k]
    return score[k], float(t)


def _grow(X, y, idx, features, depth, cfg):
    ys = y[idx]
    n = idx.size
    pos = int(ys.sum())
    frac = pos / n
    if depth >= cfg.max_depth or pos == 0 or pos == n or n < 2 * cfg.min_leaf_samples:
        return make_leaf(frac, n)
    parent = 2 * frac * (1 - frac)
    best = None
    for f in features:  # ascending, so equal scores keep the lowest feature index
        found = _gini_scan(X[idx, f], ys, cfg.min_leaf_samples)
        if found is not None and (best is None or found[0] < best[0]):
            best = (found[0], f, found[1])
    if best is None or not best[0] < parent - 1e-12:
        return make_leaf(frac, n)
    _, f, t = best
    go_left = X[idx, f] <= t
    return Split(
        int(f), t,
        _grow(X, y, idx[go_left], features, depth + 1, cfg),
        _grow(X, y, idx[~go_left], features, depth + 1, cfg),
    )


def train_forest(dataset: Dataset, config: TrainConfig = TrainConfig()) -> RandomForest:
    """Fit a random forest; deterministic for a fixed ``config.seed``."""
    if len(np.unique(dataset.y)) < 2:
        raise DegenerateTrainingSet()
    cfg = config.resolved(dataset.d)
    X, y = dataset.X, dataset.y
    n, d = X.shape
    trees = []
    for child in np.random.SeedSequence(cfg.seed).spawn(cfg.n_trees):
        rng = np.random.default_rng(child)
        features = np.sort(rng.choice(d, size=cfg.features_per_tree, replace=False))
        idx = rng.integers(0, n, size=n) if cfg.bootstrap else np.arange(n)
        trees.append(_grow(X, y, idx, features, 0, cfg))
    return RandomForest(tuple(trees), tuple(dataset.schema), cfg)


# --------------------------------------------------------------------------
# serialization


def _node_to_obj(node: Node):
    if isinstance(node, Leaf):
        return {"leaf": {"label": node.label, "frac": node.expert_fraction, "count": node.sample_count}}
    return {"split": {"f": node.feature_index, "t": node.threshold,
                      "l": _node_to_obj(node.left), "r": _node_to_obj(node.right)}}


def forest_to_dict(forest: RandomForest) -> dict:
    return {
        "schema": [{"name": s.name, "lower": s.lower, "upper": s.upper} for s in forest.schema],
        "config": asdict(forest.config),
        "trees": [_node_to_obj(t) for t in forest.trees],
    }


def save_forest(forest: RandomForest) -> bytes:
    # json writes floats with repr(), which round-trips exactly
    return json.dumps(forest_to_dict(forest), separators=(",", ":")).encode("utf-8")


def _get(obj, key, path, kind=None):
    if not isinstance(obj, dict) or key not in obj:
        raise ForestFormatError(f"missing key {key!r}", path)
    val = obj[key]
    if kind is float:
        if isinstance(val, bool) or not isinstance(val, (int, float)):
            raise ForestFormatError(f"{key!r} must be a number", path)
        return float(val)
    if kind is int:
        if isinstance(val, bool) or not isinstance(val, int):
            raise ForestFormatError(f"{key!r} must be an integer", path)
    return val


def _obj_to_node(obj, path):
    if not isinstance(obj, dict) or len(obj) != 1:
        raise ForestFormatError("node must be an object with exactly one of 'split'/'leaf'", path)
    if "leaf" in obj:
        body, p = obj["leaf"], path + ".leaf"
        label = _get(body, "label", p, int)
        frac = _get(body, "frac", p, float)
        count = _get(body, "count", p, int)
        if label not in (0, 1) or not 0.0 <= frac <= 1.0 or count < 0:
            raise ForestFormatError("leaf fields out of range", p)
        return Leaf(label, frac, count)
    if "split" in obj:
        body, p = obj["split"], path + ".split"
        return Split(_get(body, "f", p, int), _get(body, "t", p, float),
                     _obj_to_node(_get(body, "l", p), p + ".l"),
                     _obj_to_node(_get(body, "r", p), p + ".r"))
    raise ForestFormatError(f"unknown node type {next(iter(obj))!r}", path)


def forest_from_dict(doc) -> RandomForest:
    schema_doc = _get(doc, "schema", "$")
    if not isinstance(schema_doc, list):
        raise ForestFormatError("'schema' must be a list", "$.schema")
    schema = []
    for i, s in enumerate(schema_doc):
        p = f"$.schema[{i}]"
        try:
            schema.append(FeatureSpec(str(_get(s, "name", p)), _get(s, "lower", p, float), _get(s, "upper", p, float)))
        except SchemaError as e:
            raise ForestFormatError(str(e), p) from None
    cfg_doc = _get(doc, "config", "$")
    try:
        config = TrainConfig(**cfg_doc)
    except TypeError as e:
        raise ForestFormatError(str(e), "$.config") from None
    trees_doc = _get(doc, "trees", "$")
    if not isinstance(trees_doc, list):
        raise ForestFormatError("'trees' must be a list", "$.trees")
    trees = [_obj_to_node(t, f"$.trees[{i}]") for i, t in enumerate(trees_doc)]
    try:
        return RandomForest(tuple(trees), tuple(schema), config)
    except (SchemaError, ConfigError, DomainError) as e:
        raise ForestFormatError(str(e), "$") from None


def load_forest(data: bytes | str) -> RandomForest:
    try:
        doc = json.loads(data)
    except (json.JSONDecodeError, UnicodeDecodeError) as e:
        raise ForestFormatError(f"not valid JSON ({e})") from None
    return forest_from_dict(doc)
