"""Metrics, synthetic data, leave-one-novice-out benchmark and sweeps."""
from __future__ import annotations

import csv
import io
import logging
import math
import zlib
from dataclasses import asdict, dataclass, field, replace
from time import perf_counter

import numpy as np

from .baselines import MethodId, iter_iter, rand_iter, rand_rand, candidate_count
from .exceptions import ConfigError, MetricError, NoSolution
from .forest import Dataset, FeatureSpec, TrainConfig, train_forest
from .geometry import build_partition_table, extract_expert_rects
from .recourse import DAConfig, formulate_feedback

log = logging.getLogger(__name__)

STROKE_FEATURES = ("length", "speed", "acceleration", "duration", "straightness", "force")


def substream(seed: int, name: str, *keys: int) -> int:
    """Deterministic 63-bit seed for a named random stream."""
    ss = np.random.SeedSequence([seed, zlib.crc32(name.encode()), *keys])
    return int(ss.generate_state(1, dtype=np.uint64)[0] >> 1)


# --------------------------------------------------------------------------
# metrics


@dataclass(frozen=True)
class QueryResult:
    method: str
    f_before: float
    f_after: float
    micros: float
    fold: int = 0
    feature: str | None = None
    direction: str = "none"
    target: float | None = None

    @property
    def success(self) -> bool:
        return self.f_after > 0.5


def success_rate(results) -> float:
    results = list(results)
    if not results:
        raise MetricError("success rate of an empty result set is undefined")
    return sum(r.f_after > 0.5 for r in results) / len(results)


def effectiveness(results) -> tuple:
    """Mean and population std of the achieved expert probability."""
    vals = np.array([r.f_after for r in results], dtype=float)
    if vals.size == 0:
        raise MetricError("effectiveness of an empty result set is undefined")
    return float(vals.mean()), float(vals.std())


def time_cost(results) -> tuple:
    secs = np.array([r.micros for r in results], dtype=float) / 1e6
    if secs.size == 0:
        raise MetricError("time cost of an empty result set is undefined")
    return float(secs.mean()), float(secs.std())


@dataclass
class MethodSummary:
    sr: float
    eff_mean: float
    eff_std: float
    tc_mean: float
    tc_std: float
    n_queries: int

    @classmethod
    def of(cls, results) -> "MethodSummary":
        eff = effectiveness(results)
        tc = time_cost(results)
        return cls(success_rate(results), eff[0], eff[1], tc[0], tc[1], len(results))


TIMING_KEYS = frozenset({"tc_mean", "tc_std", "micros", "train_seconds"})


@dataclass
class MetricsReport:
    config: dict
    methods: dict  # name -> MethodSummary
    folds: list = field(default_factory=list)
    results: list = field(default_factory=list, repr=False)

    def to_dict(self, timing: bool = True) -> dict:
        doc = {
            "config": self.config,
            "folds": self.folds,
            "methods": {k: asdict(v) for k, v in self.methods.items()},
        }
        return doc if timing else strip_timing(doc)

    def results_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["fold", "method", "f_before", "f_after", "success", "micros", "feature", "direction", "target"])
        for r in self.results:
            w.writerow([r.fold, r.method, repr(r.f_before), repr(r.f_after), int(r.success),
                        int(round(r.micros)), r.feature or "", r.direction,
                        "" if r.target is None else repr(r.target)])
        return buf.getvalue()


def strip_timing(obj):
    if isinstance(obj, dict):
        return {k: strip_timing(v) for k, v in obj.items() if k not in TIMING_KEYS}
    if isinstance(obj, list):
        return [strip_timing(v) for v in obj]
    return obj


# --------------------------------------------------------------------------
# synthetic data


@dataclass(frozen=True)
class SyntheticConfig:
    """Two Gaussian clouds, novice (0) and expert (1).

    ``separation`` is the Euclidean distance between class means in units of
    ``noise``, spread equally over the features with random signs.
    """

    n_per_class: int = 2500
    d: int = 6
    separation: float = 2.6
    noise: float = 1.0
    n_groups: int = 12
    seed: int = 0

    def __post_init__(self):
        if self.d < 1:
            raise ConfigError("d must be >= 1")
        if self.n_per_class < 1:
            raise ConfigError("n_per_class must be >= 1")
        if self.n_groups < 2:
            raise ConfigError("n_groups must be >= 2")
        if self.n_groups > self.n_per_class:
            raise ConfigError("n_groups cannot exceed the number of novice instances")
        if not self.separation >= 0 or not self.noise > 0:
            raise ConfigError("separation must be >= 0 and noise > 0")


def feature_names(d: int) -> list:
    return [STROKE_FEATURES[i] if i < len(STROKE_FEATURES) else f"x{i + 1}" for i in range(d)]


def generate_synthetic(config: SyntheticConfig = SyntheticConfig()) -> Dataset:
    rng = np.random.default_rng(substream(config.seed, "data"))
    n, d = config.n_per_class, config.d
    signs = rng.choice((-1.0, 1.0), size=d)
    shift = signs * config.separation * config.noise / math.sqrt(d)
    novice = rng.normal(0.0, config.noise, size=(n, d))
    expert = rng.normal(0.0, config.noise, size=(n, d)) + shift
    X = np.vstack([novice, expert])
    y = np.r_[np.zeros(n, dtype=np.int64), np.ones(n, dtype=np.int64)]
    width = len(str(config.n_groups))
    novice_groups = [f"novice{g + 1:0{width}d}" for g in rng.permutation(np.arange(n) % config.n_groups)]
    groups = np.array(novice_groups + ["expert"] * n, dtype=object)
    lo, hi = X.min(axis=0), X.max(axis=0)
    hi = np.where(hi > lo, hi, lo + 1.0)
    schema = [FeatureSpec(name, float(a), float(b)) for name, a, b in zip(feature_names(d), lo, hi)]
    return Dataset(schema, X, y, groups)


# --------------------------------------------------------------------------
# running methods


class Engine:
    """A trained forest with the per-forest structures every method needs."""

    def __init__(self, forest):
        self.forest = forest
        self.table = build_partition_table(forest)
        self.rects = extract_expert_rects(forest, self.table)

    def run(self, method, x, da_config: DAConfig = DAConfig(), seed: int = 0):
        """Formulate feedback with ``method``; returns the action, or ``None``
        when DA finds no reachable expert box."""
        method = MethodId.parse(method) if isinstance(method, str) else method
        if method is MethodId.DA:
            try:
                return formulate_feedback(self.forest, self.table, self.rects, x, da_config)
            except NoSolution:
                return None
        if method is MethodId.RAND_RAND:
            return rand_rand(self.forest, self.table, x, seed)
        if method is MethodId.RAND_ITER:
            return rand_iter(self.forest, self.table, x, seed)
        return iter_iter(self.forest, self.table, x)

    def query(self, method, x, da_config: DAConfig = DAConfig(), seed: int = 0, fold: int = 0) -> QueryResult:
        method = MethodId.parse(method) if isinstance(method, str) else method
        t0 = perf_counter()
        action = self.run(method, x, da_config, seed)
        micros = (perf_counter() - t0) * 1e6
        f_before = self.forest.predict_proba(x)
        if action is None:
            return QueryResult(method.value, f_before, f_before, micros, fold)
        return QueryResult(method.value, action.f_before, action.achieved_f, micros, fold,
                           action.feature_name, action.direction, action.target_value)


def novice_queries(forest, X) -> np.ndarray:
    """Rows the forest classifies novice (F <= 0.5)."""
    return np.flatnonzero(forest.predict_proba_many(X) <= 0.5)


def _parse_methods(methods):
    return [MethodId.parse(m) if isinstance(m, str) else m for m in methods]


def _config_doc(train_config: TrainConfig, da_config: DAConfig, seed: int, **extra) -> dict:
    doc = {"train": asdict(train_config), "da": asdict(da_config), "seed": seed}
    doc.update(extra)
    return doc


def run_cv_benchmark(dataset: Dataset, methods, train_config: TrainConfig = TrainConfig(),
                     da_config: DAConfig = DAConfig(), seed: int = 0, max_queries: int | None = None,
                     progress=None) -> MetricsReport:
    """Leave-one-novice-out cross-validation.

    Fold forests are seeded from ``seed``; ``train_config.seed`` is ignored.

    Each fold holds out every instance of one novice group, trains on the
    rest and asks each method for feedback on the held-out rows the forest
    classifies novice. ``max_queries`` caps queries per fold (None = all).
    """
    methods = _parse_methods(methods)
    groups = [g for g in dict.fromkeys(dataset.groups.tolist())]
    novice_groups = sorted(g for g in groups if (dataset.y[dataset.groups == g] == 0).any())
    for g in groups:
        if g not in novice_groups:
            log.warning("group %s has no novice instances; not used as a fold", g)
    if len(novice_groups) < 2:
        raise ConfigError(f"need >= 2 novice groups for cross-validation, found {len(novice_groups)}")
    all_results, folds = [], []
    for k, group in enumerate(novice_groups):
        test_rows = np.flatnonzero(dataset.groups == group)
        train_rows = np.flatnonzero(dataset.groups != group)
        assert not np.isin(test_rows, train_rows).any()
        assert group not in set(dataset.groups[train_rows].tolist())
        cfg = replace(train_config, seed=substream(seed, "train", k))
        t0 = perf_counter()
        engine = Engine(train_forest(dataset.subset(train_rows), cfg))
        train_seconds = perf_counter() - t0
        test = dataset.subset(test_rows)
        rows = novice_queries(engine.forest, test.X)
        if max_queries is not None:
            rows = rows[:max_queries]
        fold_results = []
        for qi, row in enumerate(rows):
            x = test.X[row]
            for m in methods:
                r = engine.query(m, x, da_config, substream(seed, m.value, k, qi), fold=k)
                fold_results.append(r)
        accuracy = float((engine.forest.predict(test.X) == test.y).mean())
        fold_doc = {"fold": k, "group": group, "n_test": int(test_rows.size), "n_queries": int(rows.size),
                    "test_accuracy": accuracy, "train_seconds": train_seconds,
                    "partitions": int(engine.table.counts.sum()), "expert_rects": len(engine.rects)}
        for m in methods:
            rs = [r for r in fold_results if r.method == m.value]
            if rs:
                fold_doc[m.value] = {"sr": success_rate(rs), "eff_mean": effectiveness(rs)[0]}
        folds.append(fold_doc)
        all_results.extend(fold_results)
        if progress:
            progress(k, len(novice_groups), fold_doc)
    summaries = {}
    for m in methods:
        rs = [r for r in all_results if r.method == m.value]
        if rs:
            summaries[m.value] = MethodSummary.of(rs)
    config = _config_doc(train_config, da_config, seed, methods=[m.value for m in methods],
                         max_queries=max_queries, n_instances=dataset.n, d=dataset.d)
    return MetricsReport(config, summaries, folds, all_results)


def _sweep_queries(dataset: Dataset, forest, n_queries: int, seed: int):
    """A fixed sample of predicted-novice rows from the first novice group."""
    novice_groups = sorted({g for g, y in zip(dataset.groups, dataset.y) if y == 0})
    rows = np.flatnonzero(dataset.groups == novice_groups[0])
    picked = rows[novice_queries(forest, dataset.X[rows])]
    rng = np.random.default_rng(substream(seed, "sweep-queries"))
    if picked.size > n_queries:
        picked = np.sort(rng.choice(picked, size=n_queries, replace=False))
    return dataset.X[picked]


def _holdout_first_group(dataset: Dataset) -> Dataset:
    novice_groups = sorted({g for g, y in zip(dataset.groups, dataset.y) if y == 0})
    return dataset.subset(np.flatnonzero(dataset.groups != novice_groups[0]))


def scalability_sweep(dataset: Dataset, tree_counts, methods, da_config: DAConfig = DAConfig(),
                      train_config: TrainConfig = TrainConfig(), n_queries: int = 20, seed: int = 0,
                      progress=None) -> list:
    """Time-cost of each method as the forest grows.

    Trees are seeded per index, so the forest for ``k`` trees is the first
    ``k`` trees of the largest one; it is trained once and sliced.
    """
    tree_counts = list(tree_counts)
    if tree_counts != sorted(tree_counts) or not tree_counts:
        raise ConfigError("tree_counts must be non-empty and ascending")
    methods = _parse_methods(methods)
    cfg = replace(train_config, n_trees=max(tree_counts), seed=substream(seed, "train", 0))
    full = train_forest(_holdout_first_group(dataset), cfg)
    rows = []
    for count in tree_counts:
        engine = Engine(full.head(count))
        Q = _sweep_queries(dataset, engine.forest, n_queries, seed)
        for m in methods:
            rs = [engine.query(m, x, da_config, substream(seed, m.value, count, i)) for i, x in enumerate(Q)]
            if not rs:
                continue
            tc = time_cost(rs)
            rows.append({"trees": count, "method": m.value, "tc_mean": tc[0], "tc_std": tc[1],
                         "eff_mean": effectiveness(rs)[0], "sr": success_rate(rs), "n_queries": len(rs),
                         "candidates": candidate_count(engine.table), "expert_rects": len(engine.rects)})
        if progress:
            progress(count)
    return rows


def alpha_sweep(dataset: Dataset, alphas, gamma: float = 2.0, train_config: TrainConfig = TrainConfig(),
                n_queries: int = 50, repeats: int = 3, seed: int = 0) -> list:
    """DA effectiveness and time-cost per alpha on one forest and query sample.

    Each query is timed ``repeats`` times per alpha and the fastest run is kept.
    """
    alphas = list(alphas)
    configs = [DAConfig(a, gamma) for a in alphas]
    cfg = replace(train_config, seed=substream(seed, "train", 0))
    engine = Engine(train_forest(_holdout_first_group(dataset), cfg))
    Q = _sweep_queries(dataset, engine.forest, n_queries, seed)
    # alphas are interleaved per query so slow drift in machine speed hits
    # every alpha alike instead of showing up as a trend
    per_alpha = [[] for _ in configs]
    for x in Q:
        for rs, da in zip(per_alpha, configs):
            rs.append(min((engine.query(MethodId.DA, x, da) for _ in range(max(1, repeats))),
                          key=lambda r: r.micros))
    rows = []
    for da, rs in zip(configs, per_alpha):
        tc = time_cost(rs)
        eff = effectiveness(rs)
        rows.append({"alpha": da.alpha, "gamma": gamma, "eff_mean": eff[0], "eff_std": eff[1],
                     "sr": success_rate(rs), "tc_mean": tc[0], "tc_std": tc[1], "n_queries": len(rs)})
    return rows


def rows_csv(rows: list) -> str:
    if not rows:
        return ""
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n")
    w.writeheader()
    w.writerows(rows)
    return buf.getvalue()
