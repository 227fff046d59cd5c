"""Figures for learning runs, rendered next to the CSV files."""

from __future__ import annotations

from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402


def _band(ax, x, runs, label, color):
    runs = np.asarray(runs, dtype=float)
    mean = runs.mean(axis=0)
    std = runs.std(axis=0)
    ax.plot(x, mean, color=color, label=label, lw=1.2)
    ax.fill_between(x, mean - std, mean + std, color=color, alpha=0.25, lw=0)


def plot_stage1(curves: Sequence[np.ndarray], path: Path) -> Path:
    """Mean (and one std band) of average reward and steps in W^k."""
    n = min(len(c) for c in curves)
    x = np.arange(1, n + 1)
    fig, (ax1, ax2) = plt.subplots(2, 1, figsize=(6, 5), sharex=True)
    _band(ax1, x, [c[:n, 1] for c in curves], "average reward", "tab:blue")
    ax1.set_ylabel("average reward")
    _band(ax2, x, [c[:n, 2] for c in curves], "steps in W^k", "tab:orange")
    ax2.set_ylabel("steps in estimated region")
    ax2.set_xlabel("episode")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def plot_ind1(curves: Sequence[np.ndarray], path: Path) -> Path:
    n = min(len(c) for c in curves)
    x = np.arange(1, n + 1)
    fig, ax = plt.subplots(figsize=(6, 3))
    _band(ax, x, [c[:n, 1] for c in curves], "Ind1", "tab:green")
    ax.set_xlabel("episode")
    ax.set_ylabel("Ind1")
    ax.set_ylim(0, 1.05)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def plot_ind2(values: Sequence[float], path: Path) -> Path:
    """Histogram of final Ind2 over sessions."""
    fig, ax = plt.subplots(figsize=(5, 3))
    ax.hist([v for v in values if v is not None], bins=np.linspace(0, 1, 11), color="tab:purple", rwidth=0.9)
    ax.set_xlabel("Ind2")
    ax.set_ylabel("sessions")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def plot_returns(curves: Sequence[np.ndarray], path: Path, window: int = 100) -> Path:
    """Moving average of Stage 2 episode returns."""
    fig, ax = plt.subplots(figsize=(6, 3))
    for c in curves:
        r = c[:, 1]
        if len(r) >= window:
            r = np.convolve(r, np.ones(window) / window, mode="valid")
        ax.plot(np.arange(1, len(r) + 1), r, lw=0.8, alpha=0.7)
    ax.set_xlabel("episode")
    ax.set_ylabel(f"return ({window}-episode mean)")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path
