import csv
import io
import logging

import numpy as np
import pytest

from forest_recourse import TrainConfig, train_forest
from forest_recourse.evaluation import (
    QueryResult,
    SyntheticConfig,
    alpha_sweep,
    effectiveness,
    generate_synthetic,
    rows_csv,
    run_cv_benchmark,
    scalability_sweep,
    strip_timing,
    success_rate,
    time_cost,
)
from forest_recourse.exceptions import ConfigError, MetricError

METHODS = ["rand-rand", "rand-iter", "iter-iter", "da"]


def results(*fs):
    return [QueryResult("da", 0.2, f, 10.0) for f in fs]


def test_metric_examples():
    rs = results(0.7, 0.3, 0.8)
    assert success_rate(rs) == pytest.approx(2 / 3)
    assert effectiveness(rs)[0] == pytest.approx(0.6)
    assert effectiveness(results(0.9)) == (0.9, 0.0)
    assert success_rate(results(0.5)) == 0.0  # exactly one half is not a success
    assert time_cost(rs) == (pytest.approx(1e-5), 0.0)


@pytest.mark.parametrize("fn", [success_rate, effectiveness, time_cost])
def test_metrics_on_empty_set(fn):
    with pytest.raises(MetricError):
        fn([])


def test_strip_timing_nested():
    doc = {"a": 1, "tc_mean": 2.0, "folds": [{"train_seconds": 3, "sr": 0.5}]}
    assert strip_timing(doc) == {"a": 1, "folds": [{"sr": 0.5}]}


def test_synthetic_is_deterministic():
    cfg = SyntheticConfig(n_per_class=200, d=3, seed=4)
    a, b = generate_synthetic(cfg), generate_synthetic(cfg)
    np.testing.assert_array_equal(a.X, b.X)
    np.testing.assert_array_equal(a.y, b.y)
    assert a.groups.tolist() == b.groups.tolist()
    assert a.n == 400 and a.d == 3
    assert set(a.groups[a.y == 1].tolist()) == {"expert"}
    assert len(set(a.groups[a.y == 0].tolist())) == cfg.n_groups
    for i, spec in enumerate(a.schema):
        assert spec.lower == a.X[:, i].min() and spec.upper == a.X[:, i].max()


def test_synthetic_config_validation():
    with pytest.raises(ConfigError):
        SyntheticConfig(d=0)
    with pytest.raises(ConfigError):
        SyntheticConfig(n_per_class=0)
    with pytest.raises(ConfigError):
        SyntheticConfig(n_groups=1)


def _holdout_accuracy(sep):
    ds = generate_synthetic(SyntheticConfig(n_per_class=400, d=4, separation=sep, n_groups=2, seed=3))
    rng = np.random.default_rng(0)
    idx = rng.permutation(ds.n)
    train, test = ds.subset(idx[:500]), ds.subset(idx[500:])
    forest = train_forest(train, TrainConfig(n_trees=30, seed=1))
    return (forest.predict(test.X) == test.y).mean()


def test_zero_separation_is_chance():
    assert abs(_holdout_accuracy(0.0) - 0.5) < 0.1


def test_large_separation_is_near_perfect():
    assert _holdout_accuracy(8.0) >= 0.99


@pytest.fixture(scope="module")
def tiny_report():
    ds = generate_synthetic(SyntheticConfig(n_per_class=150, d=3, separation=2.0, n_groups=2, seed=2))
    return ds, run_cv_benchmark(ds, METHODS, TrainConfig(n_trees=15), seed=1, max_queries=10)


def test_cv_fold_bookkeeping(tiny_report):
    ds, report = tiny_report
    assert [f["group"] for f in report.folds] == ["novice1", "novice2"]
    for f in report.folds:
        assert f["n_test"] == int((ds.groups == f["group"]).sum())
        assert f["n_queries"] <= 10
    assert sum(s.n_queries for s in report.methods.values()) == len(report.results)
    for m in METHODS:
        assert report.methods[m].n_queries == sum(f["n_queries"] for f in report.folds)


def test_cv_warns_about_expert_group(caplog):
    ds = generate_synthetic(SyntheticConfig(n_per_class=60, d=2, n_groups=2, seed=2))
    with caplog.at_level(logging.WARNING):
        run_cv_benchmark(ds, ["da"], TrainConfig(n_trees=3), max_queries=2)
    assert "group expert has no novice instances" in caplog.text


def test_cv_needs_two_novice_groups():
    ds = generate_synthetic(SyntheticConfig(n_per_class=60, d=2, n_groups=2, seed=2))
    ds = ds.subset(np.flatnonzero(ds.groups != "novice1"))
    with pytest.raises(ConfigError):
        run_cv_benchmark(ds, ["da"], TrainConfig(n_trees=3))


def test_sr_recomputed_from_csv(tiny_report):
    _, report = tiny_report
    rows = list(csv.DictReader(io.StringIO(report.results_csv())))
    assert len(rows) == len(report.results)
    for m in METHODS:
        mine = [r for r in rows if r["method"] == m]
        sr = sum(float(r["f_after"]) > 0.5 for r in mine) / len(mine)
        assert sr == report.methods[m].sr
        assert np.mean([float(r["f_after"]) for r in mine]) == pytest.approx(report.methods[m].eff_mean)


def test_queries_are_predicted_novice_and_dominance(tiny_report):
    _, report = tiny_report
    assert all(r.f_before <= 0.5 for r in report.results)
    n = len(METHODS)
    for k in range(0, len(report.results), n):
        group = {r.method: r for r in report.results[k:k + n]}
        assert len({r.f_before for r in group.values()}) == 1
        assert group["iter-iter"].f_after >= group["da"].f_after
        assert group["iter-iter"].f_after >= group["rand-iter"].f_after


def test_report_is_seed_deterministic(tiny_report):
    ds, report = tiny_report
    again = run_cv_benchmark(ds, METHODS, TrainConfig(n_trees=15), seed=1, max_queries=10)
    assert again.to_dict(timing=False) == report.to_dict(timing=False)


def test_scalability_sweep_rows():
    ds = generate_synthetic(SyntheticConfig(n_per_class=150, d=3, n_groups=2, seed=2))
    rows = scalability_sweep(ds, [5, 10], ["da", "iter-iter"], n_queries=4,
                             train_config=TrainConfig(max_depth=3))
    assert [(r["trees"], r["method"]) for r in rows] == [(5, "da"), (5, "iter-iter"), (10, "da"), (10, "iter-iter")]
    assert rows[0]["candidates"] <= rows[2]["candidates"]
    text = rows_csv(rows)
    assert text.splitlines()[0].startswith("trees,method,tc_mean")
    with pytest.raises(ConfigError):
        scalability_sweep(ds, [10, 5], ["da"])


def test_alpha_sweep_rows():
    ds = generate_synthetic(SyntheticConfig(n_per_class=150, d=3, n_groups=2, seed=2))
    rows = alpha_sweep(ds, [0.2, 1.0], train_config=TrainConfig(n_trees=10, max_depth=3), n_queries=5, repeats=1)
    assert [r["alpha"] for r in rows] == [0.2, 1.0]
    assert all(0 <= r["eff_mean"] <= 1 and r["n_queries"] == rows[0]["n_queries"] for r in rows)
