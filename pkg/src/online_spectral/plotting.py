"""Metric-curve figures written next to the CSV traces."""

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .metrics import regret_bound, running_average  # noqa: E402

STYLE = {
    "font.size": 9,
    "axes.labelsize": 9,
    "legend.fontsize": 7,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "lines.linewidth": 1.2,
    "figure.dpi": 150,
    "savefig.bbox": "tight",
}


def figsize(width=4.5):
    golden = (np.sqrt(5.0) - 1.0) / 2.0
    return width, width * golden


def _mean_curve(by_seed, attr):
    curves = [running_average([getattr(r, attr) for r in rows]) for rows in by_seed.values()]
    return np.mean(curves, axis=0)


def _line_style(label):
    # spectral runs solid, baselines dashed
    return "-" if "spectral" in label else "--"


def plot_metric(results, attr, ylabel, path):
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=figsize())
        for label, by_seed in results.items():
            y = _mean_curve(by_seed, attr)
            x = np.arange(1, y.size + 1)
            ax.plot(x[1:], y[1:], _line_style(label), label=label)
        ax.set_xlabel("step n")
        ax.set_ylabel(ylabel)
        ax.set_xscale("log")
        ax.legend(frameon=False, ncol=2)
        fig.savefig(path)
        plt.close(fig)


def plot_regret(results, d, path):
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=figsize())
        n = 0
        for label, by_seed in results.items():
            curves = [[r.cum_regret for r in rows] for rows in by_seed.values()]
            y = np.mean(curves, axis=0)
            n = max(n, y.size)
            ax.plot(np.arange(1, y.size + 1), y, _line_style(label), label=label)
        t = np.arange(2, n + 1)
        ax.plot(t, regret_bound(t, d), ":", color="k", label=r"$4\sqrt{d^3}\log t$")
        ax.set_xlabel("step t")
        ax.set_ylabel("cumulative regret")
        ax.set_xscale("log")
        ax.legend(frameon=False)
        fig.savefig(path)
        plt.close(fig)


def render_run(results, outdir, d):
    """Write nll.png, recovery.png and (for oracle runs) regret.png; returns the paths."""
    outdir.mkdir(parents=True, exist_ok=True)
    paths = [outdir / "nll.png", outdir / "recovery.png"]
    plot_metric(results, "nll", "average predictive NLL", paths[0])
    plot_metric(results, "recovery_err", "average recovery error", paths[1])
    with_regret = {
        k: v for k, v in results.items() if next(iter(v.values()))[0].cum_regret is not None
    }
    if with_regret:
        paths.append(outdir / "regret.png")
        plot_regret(with_regret, d, paths[-1])
    return paths
