"""Deterministic SVG figures for reports.

Matplotlib embeds timestamps and random ids in SVG output by default,
which breaks byte-level reproducibility. Every figure produced here is
saved with a fixed hash salt and no date metadata so that two runs with
the same inputs emit identical files.
"""

from __future__ import annotations

import math
from typing import Optional, Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

__all__ = ["save_scatter", "save_overlay", "save_series"]

_SVG_RC = {
    "svg.hashsalt": "eisbridge",
    "svg.fonttype": "path",
    "figure.figsize": (5.0, 4.0),
    "figure.dpi": 100,
}


def _save(fig, path: str) -> None:
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


def save_scatter(path: str, actual, predicted, title: str = "",
                 xlabel: str = "measured", ylabel: str = "predicted") -> None:
    """Parity scatter of predictions against measured values."""
    with plt.rc_context(_SVG_RC):
        fig, ax = plt.subplots()
        ax.scatter(actual, predicted, s=14, alpha=0.7, edgecolors="none")
        finite = [v for v in list(actual) + list(predicted) if math.isfinite(v)]
        if finite:
            lo, hi = min(finite), max(finite)
            if lo == hi:
                lo, hi = lo - 0.5, hi + 0.5
            ax.plot([lo, hi], [lo, hi], lw=1.0, color="0.4", zorder=0)
        ax.set_xlabel(xlabel)
        ax.set_ylabel(ylabel)
        if title:
            ax.set_title(title)
        fig.tight_layout()
        _save(fig, path)


def save_overlay(path: str, x, measured, predicted, title: str = "",
                 xlabel: str = "x", ylabel: str = "y",
                 logx: bool = False) -> None:
    """Measured and predicted curves over a shared grid."""
    with plt.rc_context(_SVG_RC):
        fig, ax = plt.subplots()
        ax.plot(x, measured, lw=1.4, label="measured")
        ax.plot(x, predicted, lw=1.4, ls="--", label="predicted")
        if logx:
            ax.set_xscale("log")
        ax.set_xlabel(xlabel)
        ax.set_ylabel(ylabel)
        if title:
            ax.set_title(title)
        ax.legend(loc="best", fontsize=8)
        fig.tight_layout()
        _save(fig, path)


def save_series(path: str, groups: Sequence[tuple[str, Sequence[float], Sequence[float]]],
                title: str = "", xlabel: str = "x", ylabel: str = "y",
                marker: Optional[str] = "o") -> None:
    """One line per (label, x, y) group; used for per-cell trajectories."""
    with plt.rc_context(_SVG_RC):
        fig, ax = plt.subplots()
        for label, xs, ys in groups:
            ax.plot(xs, ys, lw=1.2, marker=marker, markersize=3, label=label)
        ax.set_xlabel(xlabel)
        ax.set_ylabel(ylabel)
        if title:
            ax.set_title(title)
        if groups:
            ax.legend(loc="best", fontsize=7)
        fig.tight_layout()
        _save(fig, path)
