import csv
import json

import pytest

from forest_recourse import load_forest, save_forest
from forest_recourse.cli import main


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


@pytest.fixture
def three_box_file(tmp_path, three_box_forest):
    path = tmp_path / "three_box.json"
    path.write_bytes(save_forest(three_box_forest))
    return path


@pytest.fixture(scope="module")
def data_file(tmp_path_factory):
    path = tmp_path_factory.mktemp("cli") / "data.csv"
    assert main(["gen-data", "--n", "300", "--d", "3", "--groups", "3", "--seed", "4", "-o", str(path)]) == 0
    return path


def test_gen_data_is_deterministic(tmp_path, capsys, data_file):
    again = tmp_path / "again.csv"
    code, out, _ = run(capsys, "gen-data", "--n", 300, "--d", 3, "--groups", 3, "--seed", 4, "-o", again)
    assert code == 0 and "wrote 300 instances" in out
    assert again.read_bytes() == data_file.read_bytes()
    header = data_file.read_text().splitlines()[0]
    assert header == "f_length,f_speed,f_acceleration,label,group"


@pytest.mark.parametrize("argv", [["--d", "0"], ["--n", "7"], ["--groups", "1"]])
def test_gen_data_bad_arguments(tmp_path, capsys, argv):
    code, _, err = run(capsys, "gen-data", *argv, "-o", tmp_path / "x.csv")
    assert code == 2 and err.startswith("error:")


def test_train_round_trip(tmp_path, capsys, data_file):
    model = tmp_path / "model.json"
    code, out, _ = run(capsys, "train", "-i", data_file, "-o", model, "--trees", 7, "--depth", 3, "--seed", 2)
    assert code == 0 and "trained 7 trees" in out
    forest = load_forest(model.read_bytes())
    assert forest.n_trees == 7 and forest.config.max_depth == 3
    assert load_forest(save_forest(forest)) == forest


def test_train_missing_input(tmp_path, capsys):
    code, _, err = run(capsys, "train", "-i", tmp_path / "nope.csv", "-o", tmp_path / "m.json")
    assert code == 2 and "cannot read" in err


def test_feedback_three_box(capsys, three_box_file):
    code, out, _ = run(capsys, "feedback", "--forest", three_box_file, "--x", "0.9,0.2")
    doc = json.loads(out)
    assert code == 0 and doc["status"] == "ok"
    assert (doc["feature"], doc["direction"]) == ("x1", "decrease")
    assert doc["target"] == pytest.approx(0.4)
    assert doc["f_before"] == pytest.approx(1 / 3) and doc["f_after"] == 1.0
    assert isinstance(doc["micros"], int)


def test_feedback_oracle_not_worse_than_da(capsys, three_box_file):
    f_after = {}
    for m in ("da", "iter-iter", "rand-iter", "rand-rand"):
        code, out, _ = run(capsys, "feedback", "--forest", three_box_file, "--x", "0.9,0.2", "--method", m, "--seed", 3)
        assert code == 0
        f_after[m] = json.loads(out)["f_after"]
    assert f_after["iter-iter"] >= max(f_after.values())


@pytest.mark.parametrize("vec", ["0.9;x", "", "0.9,nan", "0.1,0.2,0.3"])
def test_feedback_malformed_vector(capsys, three_box_file, vec):
    code, _, err = run(capsys, "feedback", "--forest", three_box_file, "--x", vec)
    assert code == 2 and "error" in err


def test_feedback_out_of_domain(capsys, three_box_file):
    code, _, err = run(capsys, "feedback", "--forest", three_box_file, "--x", "1.5,0.2")
    assert code == 2


def test_feedback_already_expert(capsys, three_box_file):
    code, out, _ = run(capsys, "feedback", "--forest", three_box_file, "--x", "0.4,0.1")
    assert code == 0 and json.loads(out)["status"] == "already expert"


def test_feedback_from_csv_row(tmp_path, capsys, data_file):
    model = tmp_path / "m.json"
    assert main(["train", "-i", str(data_file), "-o", str(model), "--trees", "5"]) == 0
    capsys.readouterr()
    code, out, _ = run(capsys, "feedback", "--forest", model, "--csv", data_file, "--row", 3)
    assert code == 0 and json.loads(out)["status"] in ("ok", "already expert", "no solution")
    code, _, _ = run(capsys, "feedback", "--forest", model, "--csv", data_file, "--row", 10_000)
    assert code == 2


def test_bench_writes_report(tmp_path, capsys, data_file):
    out_dir = tmp_path / "bench"
    code, out, _ = run(capsys, "bench", "-i", data_file, "--trees", 10, "--max-queries", 5, "-o", out_dir)
    assert code == 0
    doc = json.loads((out_dir / "report.json").read_text())
    assert set(doc["methods"]) == {"da", "iter-iter", "rand-rand", "rand-iter"}
    assert len(doc["folds"]) == 3
    rows = list(csv.DictReader((out_dir / "queries.csv").open()))
    assert len(rows) == sum(s["n_queries"] for s in doc["methods"].values())
    assert (out_dir / "summary.png").stat().st_size > 0
    assert "success rate" in out and "effectiveness" in out


def test_bench_tree_sweep(tmp_path, capsys, data_file):
    out_dir = tmp_path / "sweep"
    code, _, _ = run(capsys, "bench", "-i", data_file, "--sweep", "trees=5:15:5", "--sweep-queries", 3,
                     "--methods", "da,iter-iter", "-o", out_dir)
    assert code == 0
    rows = list(csv.DictReader((out_dir / "sweep_trees.csv").open()))
    assert [r["trees"] for r in rows] == ["5", "5", "10", "10", "15", "15"]
    assert (out_dir / "sweep_trees.png").exists()


def test_bench_alpha_sweep_without_plots(tmp_path, capsys, data_file):
    out_dir = tmp_path / "alpha"
    code, _, _ = run(capsys, "bench", "-i", data_file, "--sweep", "alpha=0.5,1.0", "--trees", 5,
                     "--sweep-queries", 3, "--no-plots", "-o", out_dir)
    assert code == 0
    rows = list(csv.DictReader((out_dir / "sweep_alpha.csv").open()))
    assert [float(r["alpha"]) for r in rows] == [0.5, 1.0]
    assert not (out_dir / "sweep_alpha.png").exists()


@pytest.mark.parametrize("sweep", ["depth=1:2:1", "trees=10:5:1", "alpha=0:1:0.5"])
def test_bench_bad_sweep(tmp_path, capsys, data_file, sweep):
    code, _, _ = run(capsys, "bench", "-i", data_file, "--sweep", sweep, "-o", tmp_path)
    assert code == 2


def test_bench_unknown_method(tmp_path, capsys, data_file):
    code, _, err = run(capsys, "bench", "-i", data_file, "--methods", "da,svm", "-o", tmp_path)
    assert code == 2 and "unknown method" in err


def test_config_file(tmp_path, capsys, data_file):
    cfg = tmp_path / "train.cfg"
    cfg.write_text("# forest shape\ntrees = 4\ndepth=2\nno-bootstrap = true\n")
    model = tmp_path / "m.json"
    code, _, _ = run(capsys, "train", "--config", cfg, "-i", data_file, "-o", model)
    assert code == 0
    forest = load_forest(model.read_bytes())
    assert forest.n_trees == 4 and forest.config.max_depth == 2 and not forest.config.bootstrap
    # command-line flags win over the file
    code, _, _ = run(capsys, "train", "--config", cfg, "-i", data_file, "-o", model, "--trees", 6)
    assert code == 0 and load_forest(model.read_bytes()).n_trees == 6


def test_config_file_unknown_key(tmp_path, capsys, data_file):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("colour = blue\n")
    code, _, err = run(capsys, "train", "--config", cfg, "-i", data_file, "-o", tmp_path / "m.json")
    assert code == 2 and "unknown setting" in err


def test_verbose_after_subcommand(tmp_path, capsys, data_file):
    code, _, _ = run(capsys, "train", "-i", data_file, "-o", tmp_path / "m.json", "--trees", 2, "-v")
    assert code == 0
