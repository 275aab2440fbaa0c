"""Optional log-log figure for bench results; the CSV remains the data of record."""

from __future__ import annotations

from typing import Sequence


def plot_bench(rows: Sequence, slope: float, path: str, title: str = "") -> None:
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    import numpy as np

    ns = np.array([r.n for r in rows], float)
    means = np.array([r.mean for r in rows], float)
    errs = np.array([r.stddev / max(r.trials, 1) ** 0.5 for r in rows], float)
    fig, ax = plt.subplots(figsize=(5, 4))
    ax.errorbar(ns, means, yerr=errs, fmt="o", capsize=3, label="mean interactions")
    if len(rows) >= 2:
        coef = np.polyfit(np.log(ns), np.log(means), 1)
        xs = np.geomspace(ns.min(), ns.max(), 50)
        ax.plot(xs, np.exp(np.polyval(coef, np.log(xs))), "--",
                label=f"fit, slope {slope:.2f}")
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.set_xlabel("agents n")
    ax.set_ylabel("interactions to termination")
    if title:
        ax.set_title(title)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
