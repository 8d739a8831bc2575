"""Matplotlib renderings of the trajectory, group-mean and mirrored-score tables."""

from __future__ import annotations

from pathlib import Path
from typing import Dict, List, Sequence, Tuple

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

AXIS_LABELS = ("x", "y", "z")
_PNG_META = {"Software": None}


def _save(fig, path) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, dpi=120, metadata=_PNG_META)
    plt.close(fig)


def plot_trajectories(ground_truth: np.ndarray, samples: Sequence[np.ndarray], path, fps: int = 25,
                      title: str = "") -> None:
    """Three stacked panels (x, y, z): ground truth in black, one coloured line per sample."""
    t = np.arange(ground_truth.shape[0]) / fps
    fig, axes = plt.subplots(3, 1, figsize=(8, 6.5), sharex=True)
    colors = plt.cm.tab10(np.linspace(0, 1, max(len(samples), 1)))
    for a, ax in enumerate(axes):
        for i, s in enumerate(samples):
            ax.plot(t, s[:, a], color=colors[i], lw=0.8, alpha=0.8)
        ax.plot(t, ground_truth[:, a], color="k", lw=1.6)
        ax.set_ylabel(f"r{AXIS_LABELS[a]} (rad)")
    axes[-1].set_xlabel("time (s)")
    if title:
        axes[0].set_title(title)
    fig.tight_layout()
    _save(fig, path)


def plot_group_means(rows: Sequence[Tuple[str, float, float, float]], per_level: Dict[str, List[float]],
                     path, xlabel: str = "group") -> None:
    """Large dots for level means with CI bars, small jittered dots per utterance, dashed line at 0.5."""
    fig, ax = plt.subplots(figsize=(max(3.0, 0.55 * len(rows) + 1.5), 3.6))
    rng = np.random.default_rng(0)
    x = np.arange(len(rows))
    for i, (lvl, _, _, _) in enumerate(rows):
        vals = np.asarray(per_level.get(lvl, []), dtype=float)
        ax.scatter(i + rng.uniform(-0.15, 0.15, vals.size), vals, s=5, color="0.6", zorder=1)
    means = np.array([r[1] for r in rows])
    lo = np.array([r[2] for r in rows])
    hi = np.array([r[3] for r in rows])
    ax.errorbar(x, means, yerr=[np.maximum(means - lo, 0), np.maximum(hi - means, 0)], fmt="o", ms=7, color="C0", capsize=3, zorder=2)
    ax.axhline(0.5, ls="--", color="k", lw=0.8)
    ax.set_xticks(x)
    ax.set_xticklabels([r[0] for r in rows])
    ax.set_ylim(-0.02, 1.02)
    ax.set_xlabel(xlabel)
    ax.set_ylabel("perceptual score")
    fig.tight_layout()
    _save(fig, path)
