"""Render experiment curves to image files.

One figure per result file, written next to the CSV.  Uses the Agg
backend so the CLI works headless.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

__all__ = ["render_curves"]

_STYLE = {
    "glrds": {"color": "tab:red", "marker": "o"},
    "full_rls": {"color": "tab:blue", "marker": "s"},
    "eig": {"color": "tab:green", "marker": "^"},
    "mmse_oracle": {"color": "black", "linestyle": "--", "marker": ""},
}


def _series(points, algo, metric):
    pts = sorted((p.x, p.mean) for p in points if p.algo == algo and p.metric == metric)
    if not pts:
        return None, None
    xs, ys = zip(*pts)
    return np.asarray(xs), np.asarray(ys)


def _rolling(y, width):
    if width <= 1 or y.size < 2 * width:
        return y
    kernel = np.ones(width) / width
    return np.convolve(y, kernel, mode="same")


def render_curves(points, path, title=None):
    """Plot the curves contained in ``points`` and save to ``path``.

    BER results (metric ``ber``) go on a log axis against the symbol
    index, lightly smoothed for readability; rank sweeps plot the
    decibel MSE against the rank.
    """
    metrics = {p.metric for p in points}
    algos = [a for a in ("glrds", "full_rls", "eig", "mmse_oracle")
             if any(p.algo == a for p in points)]
    fig, ax = plt.subplots(figsize=(7.0, 4.5))

    if "ber" in metrics:
        for algo in algos:
            xs, ys = _series(points, algo, "ber")
            if xs is None:
                continue
            floor = 1e-5
            ax.semilogy(xs, np.maximum(_rolling(ys, 25), floor),
                        label=algo, linewidth=1.4,
                        color=_STYLE.get(algo, {}).get("color"))
        ax.set_xlabel("received symbols")
        ax.set_ylabel("BER")
    else:
        for algo in algos:
            xs, ys = _series(points, algo, "mse_db")
            if xs is None:
                continue
            style = _STYLE.get(algo, {})
            ax.plot(xs, ys, label=algo, linewidth=1.4,
                    marker=style.get("marker", "o"),
                    linestyle=style.get("linestyle", "-"),
                    color=style.get("color"))
        ax.set_xlabel("rank")
        ax.set_ylabel("MSE (dB)")

    if title:
        ax.set_title(title)
    ax.grid(True, linestyle="--", alpha=0.5)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path
