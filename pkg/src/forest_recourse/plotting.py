"""Figures written next to benchmark reports."""
from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402

STYLE = {
    "figure.figsize": (6.4, 3.6),
    "figure.dpi": 100,
    "savefig.dpi": 150,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "font.size": 9,
    "legend.fontsize": 8,
    "legend.frameon": False,
}

# column order of the summary table
METHOD_ORDER = ("rand-rand", "iter-iter", "rand-iter", "da")
COLORS = {"da": "C3", "iter-iter": "C0", "rand-iter": "C2", "rand-rand": "C7"}


def _ordered(names):
    known = [m for m in METHOD_ORDER if m in names]
    return known + sorted(set(names) - set(known))


def _save(fig, path):
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
    return path


def plot_summary(report_doc: dict, path):
    """SR / EFF / TC bars per method from a report dictionary."""
    methods = report_doc["methods"]
    names = _ordered(methods)
    colors = [COLORS.get(m, "C1") for m in names]
    with plt.rc_context(STYLE):
        fig, axes = plt.subplots(1, 3, figsize=(9, 3))
        axes[0].bar(names, [methods[m]["sr"] for m in names], color=colors)
        axes[0].set_title("success rate")
        axes[0].set_ylim(0, 1)
        axes[1].bar(names, [methods[m]["eff_mean"] for m in names], color=colors,
                    yerr=[methods[m]["eff_std"] for m in names], capsize=3)
        axes[1].set_title("effectiveness")
        axes[1].set_ylim(0, 1)
        axes[2].bar(names, [methods[m]["tc_mean"] for m in names], color=colors)
        axes[2].set_yscale("log")
        axes[2].set_title("time-cost (s)")
        for ax in axes:
            ax.tick_params(axis="x", labelrotation=30)
        return _save(fig, path)


def plot_tree_sweep(rows: list, path):
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        for m in _ordered({r["method"] for r in rows}):
            pts = [(r["trees"], r["tc_mean"]) for r in rows if r["method"] == m]
            ax.plot(*zip(*pts), marker="o", ms=3, label=m, color=COLORS.get(m))
        ax.axhline(1.0, ls="--", lw=0.8, color="k")
        ax.set_yscale("log")
        ax.set_xlabel("number of trees")
        ax.set_ylabel("time-cost per feedback (s)")
        ax.legend()
        return _save(fig, path)


def plot_alpha_sweep(rows: list, path):
    alphas = [r["alpha"] for r in rows]
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        ax.plot(alphas, [r["eff_mean"] for r in rows], marker="o", ms=3, color="C3", label="effectiveness")
        ax.set_xlabel(r"$\alpha$")
        ax.set_ylabel("effectiveness")
        ax.set_ylim(0, 1)
        tx = ax.twinx()
        tx.plot(alphas, [r["tc_mean"] * 1e3 for r in rows], marker="s", ms=3, color="C0", label="time-cost")
        tx.set_ylabel("time-cost (ms)")
        tx.grid(False)
        fig.legend(loc="lower right")
        return _save(fig, path)
