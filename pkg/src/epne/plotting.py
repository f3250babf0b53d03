"""Figures written next to the TSV/CSV outputs of the CLI."""
from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

STYLE = {
    "figure.figsize": (5.0, 3.4),
    "figure.dpi": 120,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "font.size": 9,
    "legend.frameon": False,
}


def _save(fig, path):
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
    return path


def plot_losses(rows, path):
    """Per-snapshot mean of each loss term, from ``LossTrace`` rows."""
    ts = sorted({r.t for r in rows})
    last = {t: [r for r in rows if r.t == t][-1] for t in ts}
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        ax.plot(ts, [last[t].struct for t in ts], marker="o", ms=3, label="structural")
        ax.plot(ts, [last[t].temporal for t in ts], marker="s", ms=3, label="temporal")
        ax.plot(ts, [last[t].smooth for t in ts], marker="^", ms=3, label="smoothness")
        ax.set_xlabel("snapshot")
        ax.set_ylabel("loss (last epoch)")
        ax.set_yscale("symlog", linthresh=1e-3)
        ax.legend()
        return _save(fig, path)


def plot_f1(results, path, title=None):
    """Macro/Micro-F1 (mean with std band) against training ratio."""
    ratios = np.array([r.train_ratio for r in results])
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        for name, mean, std in (("Macro-F1", "macro_mean", "macro_std"), ("Micro-F1", "micro_mean", "micro_std")):
            m = np.array([getattr(r, mean) for r in results])
            s = np.array([getattr(r, std) for r in results])
            if len(ratios) > 1:
                line, = ax.plot(ratios, m, marker="o", ms=3, label=name)
                ax.fill_between(ratios, m - s, m + s, color=line.get_color(), alpha=0.2, lw=0)
            else:
                ax.errorbar(ratios, m, yerr=s, fmt="o", capsize=3, label=name)
        ax.set_xlabel("training ratio")
        ax.set_ylabel("F1")
        ax.set_ylim(0, 1.02)
        if title:
            ax.set_title(title)
        ax.legend()
        return _save(fig, path)


def plot_projection(coords, labels, path, title=None):
    coords = np.asarray(coords)
    labels = np.asarray(labels, dtype=object)
    with plt.rc_context({**STYLE, "figure.figsize": (4.2, 4.0)}):
        fig, ax = plt.subplots()
        for lab in sorted(set(labels.tolist()), key=str):
            m = labels == lab
            ax.scatter(coords[m, 0], coords[m, 1], s=8, alpha=0.8, label=str(lab))
        ax.set_xlabel("PC 1")
        ax.set_ylabel("PC 2")
        if title:
            ax.set_title(title)
        if len(set(labels.tolist())) <= 12:
            ax.legend(markerscale=1.5, fontsize=7)
        return _save(fig, path)
