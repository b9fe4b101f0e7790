"""Command-line interface: ``forest-recourse {gen-data,train,feedback,bench}``.

Exit codes: 0 success, 2 usage or validation error, 1 runtime failure.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .baselines import MethodId
from .evaluation import (
    Engine,
    SyntheticConfig,
    alpha_sweep,
    generate_synthetic,
    rows_csv,
    run_cv_benchmark,
    scalability_sweep,
    substream,
)
from .exceptions import RecourseError
from .forest import TrainConfig, load_forest, read_dataset_csv, save_forest, train_forest, write_dataset_csv
from .recourse import DAConfig

log = logging.getLogger("forest_recourse")


class UsageError(Exception):
    pass


def _read_text(path) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise UsageError(f"cannot read {path}: {e.strerror}") from None


def _write(path, data) -> None:
    path = Path(path)
    try:
        if path.parent != Path("."):
            path.parent.mkdir(parents=True, exist_ok=True)
        if isinstance(data, bytes):
            path.write_bytes(data)
        else:
            path.write_text(data, encoding="utf-8")
    except OSError as e:
        raise OSError(f"cannot write {path}: {e.strerror}") from None


def _train_config(args) -> TrainConfig:
    return TrainConfig(args.trees, args.depth, args.features_per_tree, not args.no_bootstrap,
                       args.min_leaf, args.seed)


def _parse_vector(text: str) -> np.ndarray:
    try:
        vals = [float(v) for v in text.replace(";", ",").split(",") if v.strip()]
    except ValueError:
        raise UsageError(f"malformed feature vector {text!r}: expected comma-separated numbers") from None
    if not vals or not np.all(np.isfinite(vals)):
        raise UsageError(f"malformed feature vector {text!r}")
    return np.array(vals)


def _parse_sweep(spec: str):
    key, sep, rng = spec.partition("=")
    key = key.strip()
    if not sep or key not in ("trees", "alpha"):
        raise UsageError(f"--sweep expects trees=<a:b:step> or alpha=<a:b:step>, got {spec!r}")
    conv = int if key == "trees" else float
    try:
        if ":" in rng:
            a, b, step = (conv(v) for v in rng.split(":"))
            if step <= 0 or b < a:
                raise ValueError
            n = int(round((b - a) / step)) + 1
            vals = [conv(round(a + k * step, 10)) for k in range(n) if a + k * step <= b + 1e-9]
        else:
            vals = [conv(v) for v in rng.split(",")]
    except ValueError:
        raise UsageError(f"bad sweep range {rng!r}") from None
    if not vals or vals != sorted(vals):
        raise UsageError(f"sweep values must be ascending: {vals}")
    if key == "trees" and vals[0] < 1:
        raise UsageError("tree counts must be >= 1")
    if key == "alpha" and not all(0 < v <= 1 for v in vals):
        raise UsageError("alpha values must lie in (0, 1]")
    return key, vals


# --------------------------------------------------------------------------
# commands


def cmd_gen_data(args) -> int:
    if args.n < 2 or args.n % 2:
        raise UsageError("--n must be an even number >= 2 (half expert, half novice)")
    cfg = SyntheticConfig(args.n // 2, args.d, args.sep, args.noise, args.groups, args.seed)
    ds = generate_synthetic(cfg)
    _write(args.output, write_dataset_csv(ds))
    print(f"wrote {ds.n} instances ({ds.d} features, {args.groups} novice groups) to {args.output}")
    return 0


def cmd_train(args) -> int:
    ds = read_dataset_csv(_read_text(args.input))
    forest = train_forest(ds, _train_config(args))
    _write(args.output, save_forest(forest))
    acc = float((forest.predict(ds.X) == ds.y).mean())
    print(f"trained {forest.n_trees} trees (max depth {forest.config.max_depth}); "
          f"train accuracy {acc:.4f}; wrote {args.output}")
    return 0


def cmd_feedback(args) -> int:
    forest = load_forest(_read_text(args.forest))
    if args.x is not None:
        x = _parse_vector(args.x)
    else:
        ds = read_dataset_csv(_read_text(args.csv), schema=None)
        if not 0 <= args.row < ds.n:
            raise UsageError(f"--row {args.row} out of range [0, {ds.n})")
        x = ds.X[args.row]
    if x.size != forest.d:
        raise UsageError(f"query has {x.size} values, forest expects {forest.d}")
    method = MethodId.parse(args.method)
    da = DAConfig(args.alpha, args.gamma)
    f_before = forest.predict_proba(x)
    if f_before > 0.5:
        print(json.dumps({"status": "already expert", "method": method.value, "f_before": f_before}))
        return 0
    action = Engine(forest).run(method, x, da, substream(args.seed, method.value))
    if action is None:
        f = forest.predict_proba(x)
        print(json.dumps({"status": "no solution", "method": method.value, "f_before": f, "f_after": f}))
        return 0
    doc = {"status": "ok", "method": method.value, **action.to_json()}
    print(json.dumps(doc))
    return 0


def format_summary(report_doc: dict) -> str:
    methods = report_doc["methods"]
    order = [m for m in ("rand-rand", "iter-iter", "rand-iter", "da") if m in methods]
    order += [m for m in methods if m not in order]
    head = f"{'':14s}" + "".join(f"{m:>18s}" for m in order)
    lines = [head]
    for label, mean, std in (("success rate", "sr", None), ("effectiveness", "eff_mean", "eff_std"),
                             ("time-cost (s)", "tc_mean", "tc_std")):
        cells = []
        for m in order:
            s = methods[m]
            cells.append(f"{s[mean]:.3f}" + (f"±{s[std]:.3f}" if std else ""))
        lines.append(f"{label:14s}" + "".join(f"{c:>18s}" for c in cells))
    return "\n".join(lines)


def _sweep_table(rows, key) -> str:
    cols = [key, "method", "tc_mean", "eff_mean", "sr"] if key == "trees" else [key, "tc_mean", "eff_mean", "sr"]
    out = ["  ".join(f"{c:>10s}" for c in cols)]
    for r in rows:
        out.append("  ".join(f"{r[c]:>10.4g}" if isinstance(r[c], float) else f"{str(r[c]):>10s}" for c in cols))
    return "\n".join(out)


def cmd_bench(args) -> int:
    methods = [MethodId.parse(m) for m in args.methods.split(",") if m.strip()]
    if not methods:
        raise UsageError("--methods is empty")
    sweep = _parse_sweep(args.sweep) if args.sweep else None
    da = DAConfig(args.alpha, args.gamma)
    train_cfg = _train_config(args)
    train_cfg.validate()
    ds = read_dataset_csv(_read_text(args.input))
    out = Path(args.out)
    if sweep:
        key, vals = sweep
        if key == "trees":
            rows = scalability_sweep(ds, vals, methods, da, train_cfg, n_queries=args.sweep_queries, seed=args.seed,
                                     progress=lambda c: log.info("trees=%d done", c))
        else:
            rows = alpha_sweep(ds, vals, args.gamma, train_cfg, n_queries=args.sweep_queries, seed=args.seed)
        _write(out / f"sweep_{key}.csv", rows_csv(rows))
        print(_sweep_table(rows, key))
        if not args.no_plots:
            from . import plotting
            fn = plotting.plot_tree_sweep if key == "trees" else plotting.plot_alpha_sweep
            fn(rows, out / f"sweep_{key}.png")
        print(f"wrote {out / f'sweep_{key}.csv'}")
        return 0

    def progress(k, n, fold):
        log.info("fold %d/%d (%s): %d queries", k + 1, n, fold["group"], fold["n_queries"])

    report = run_cv_benchmark(ds, methods, train_cfg, da, seed=args.seed, max_queries=args.max_queries,
                              progress=progress)
    doc = report.to_dict()
    _write(out / "report.json", json.dumps(doc, indent=2) + "\n")
    _write(out / "queries.csv", report.results_csv())
    if not args.no_plots:
        from . import plotting
        plotting.plot_summary(doc, out / "summary.png")
    print(format_summary(doc))
    print(f"wrote {out / 'report.json'} and {out / 'queries.csv'}")
    return 0


# --------------------------------------------------------------------------
# parser


def _add_forest_flags(p):
    p.add_argument("--trees", type=int, default=100)
    p.add_argument("--depth", type=int, default=5)
    p.add_argument("--features-per-tree", type=int, default=None)
    p.add_argument("--min-leaf", type=int, default=1)
    p.add_argument("--no-bootstrap", action="store_true")


def _add_da_flags(p):
    p.add_argument("--alpha", type=float, default=0.5)
    p.add_argument("--gamma", type=float, default=2.0)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    # SUPPRESS so a subcommand's unset flag does not clobber the global one
    common.add_argument("--config", default=argparse.SUPPRESS,
                        help="key=value file supplying defaults for the subcommand's flags")
    common.add_argument("-v", "--verbose", action="store_true", default=argparse.SUPPRESS)
    parser = argparse.ArgumentParser(prog="forest-recourse", description=__doc__.splitlines()[0],
                                     parents=[common])
    sub = parser.add_subparsers(dest="command", required=True)
    _add = sub.add_parser

    def add_parser(name, **kw):
        return _add(name, parents=[common], **kw)

    sub.add_parser = add_parser

    p = sub.add_parser("gen-data", help="write a synthetic expert/novice dataset CSV")
    p.add_argument("--n", type=int, default=5000, help="total instances (half per class)")
    p.add_argument("--d", type=int, default=6)
    p.add_argument("--groups", type=int, default=12, help="number of simulated novices")
    p.add_argument("--sep", type=float, default=2.6, help="class mean separation in noise units")
    p.add_argument("--noise", type=float, default=1.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_gen_data)

    p = sub.add_parser("train", help="train a forest and write it as JSON")
    p.add_argument("-i", "--input", required=True)
    p.add_argument("-o", "--output", required=True)
    _add_forest_flags(p)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("feedback", help="formulate feedback for one instance")
    p.add_argument("--forest", required=True)
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--x", help="comma-separated feature values")
    src.add_argument("--csv", help="dataset CSV to take the query row from")
    p.add_argument("--row", type=int, default=0)
    p.add_argument("--method", default="da", choices=[m.value for m in MethodId])
    _add_da_flags(p)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_feedback)

    p = sub.add_parser("bench", help="leave-one-novice-out benchmark or parameter sweep")
    p.add_argument("-i", "--input", required=True)
    p.add_argument("--methods", default="da,iter-iter,rand-rand,rand-iter")
    _add_forest_flags(p)
    _add_da_flags(p)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--max-queries", type=int, default=None, help="cap on queries per fold")
    p.add_argument("--sweep", default=None, help="trees=<a:b:step> or alpha=<a:b:step>")
    p.add_argument("--sweep-queries", type=int, default=20)
    p.add_argument("-o", "--out", default="bench_out", help="output directory")
    p.add_argument("--no-plots", action="store_true")
    p.set_defaults(func=cmd_bench)
    return parser


def _apply_config_file(parser, argv):
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    if not known.config:
        return
    first = parser.parse_args(argv)
    sub = parser._subparsers._group_actions[0].choices[first.command]
    actions = {a.dest: a for a in sub._actions}
    defaults = {}
    for lineno, line in enumerate(_read_text(known.config).splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        dest = key.strip().lstrip("-").replace("-", "_")
        if not sep or dest not in actions or dest in ("help", "config", "verbose"):
            parser.error(f"{known.config}:{lineno}: unknown setting {key.strip()!r} for {first.command}")
        action, value = actions[dest], value.strip()
        if isinstance(action, argparse._StoreTrueAction):
            defaults[dest] = value.lower() in ("1", "true", "yes", "on")
        else:
            try:
                defaults[dest] = action.type(value) if action.type else value
            except ValueError:
                parser.error(f"{known.config}:{lineno}: bad value {value!r} for {key.strip()}")
    sub.set_defaults(**defaults)


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    parser = build_parser()
    try:
        _apply_config_file(parser, argv)
        args = parser.parse_args(argv)
    except UsageError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except SystemExit as e:
        return int(e.code or 0)
    logging.basicConfig(level=logging.INFO if getattr(args, "verbose", False) else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (UsageError, RecourseError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except Exception as e:  # runtime failure
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
