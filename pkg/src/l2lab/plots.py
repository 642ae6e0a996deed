"""Minimal static SVG plots: series, proportions, and histograms.

Output is byte-reproducible: fixed hash salt for element ids and no date
metadata, so identical data yields identical files.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
matplotlib.rcParams["svg.hashsalt"] = "l2lab"

import matplotlib.pyplot as plt  # noqa: E402

__all__ = ["plot_series", "plot_hist"]

_SAVE_KW = {"format": "svg", "metadata": {"Date": None}}


def plot_series(path: str | Path, values, ylabel: str, title: str, refs: dict[str, float] | None = None):
    fig, ax = plt.subplots(figsize=(5.0, 3.2))
    ax.plot(values, lw=0.8, color="#1f77b4")
    for label, level in (refs or {}).items():
        ax.axhline(level, color="red", ls="--", lw=0.9)
        ax.annotate(label, xy=(0.99, level), xycoords=("axes fraction", "data"),
                    ha="right", va="bottom", fontsize=8, color="red")
    ax.set_xlabel("update")
    ax.set_ylabel(ylabel)
    ax.set_title(title, fontsize=10)
    fig.tight_layout()
    fig.savefig(path, **_SAVE_KW)
    plt.close(fig)


def plot_hist(path: str | Path, values, xlabel: str, title: str, refs: dict[str, float] | None = None):
    fig, ax = plt.subplots(figsize=(5.0, 3.2))
    ax.hist(values, bins=60, color="#1f77b4")
    for label, level in (refs or {}).items():
        ax.axvline(level, color="red", ls="--", lw=0.9)
        ax.annotate(label, xy=(level, 0.95), xycoords=("data", "axes fraction"),
                    ha="left", va="top", fontsize=8, color="red")
    ax.set_xlabel(xlabel)
    ax.set_ylabel("count")
    ax.set_title(title, fontsize=10)
    fig.tight_layout()
    fig.savefig(path, **_SAVE_KW)
    plt.close(fig)
