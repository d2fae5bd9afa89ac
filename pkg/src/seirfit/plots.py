"""SVG trajectory plots for observed-vs-predicted infection series."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

# a fixed hash salt keeps SVG clip-path ids stable across runs
matplotlib.rcParams["svg.hashsalt"] = "seirfit"


def moving_average(series, window: int = 5) -> np.ndarray:
    """Centered moving average with shrinking windows at the edges."""
    x = np.asarray(series, dtype=np.float64)
    half = window // 2
    out = np.empty_like(x)
    for i in range(x.size):
        lo, hi = max(0, i - half), min(x.size, i + half + 1)
        out[i] = x[lo:hi].mean()
    return out


def plot_trajectories(path, series: dict, title: str = "",
                      smooth_window: int = 0) -> None:
    """Write one SVG with a line per named infection series.

    ``smooth_window`` > 1 applies a centered moving average to every series;
    0 or 1 plots the raw values.
    """
    fig, ax = plt.subplots(figsize=(6.0, 3.6))
    for name, values in sorted(series.items()):
        y = np.asarray(values, dtype=np.float64)
        if smooth_window > 1:
            y = moving_average(y, smooth_window)
        ax.plot(np.arange(1, y.size + 1), y, label=name)
    ax.set_xlabel("time step")
    ax.set_ylabel("infectious count")
    if title:
        ax.set_title(title)
    ax.legend(loc="best", fontsize=8)
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
