"""Figure rendering for benchmark reports."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .rollout import EpisodeResult
from .sweep import SweepRow

_MODE_COLORS = {"gaussian-init": "tab:gray", "gpm-init": "tab:blue", "gpm+lcm": "tab:green"}


def plot_tradeoff(rows: list[SweepRow], path: str | Path) -> None:
    """Median endpoint error against mean consumed NFE, one curve per mode."""
    fig, ax = plt.subplots(figsize=(5.5, 4))
    by_mode: dict[str, list[SweepRow]] = {}
    for row in rows:
        by_mode.setdefault(row.cell.mode, []).append(row)
    for mode, mode_rows in by_mode.items():
        mode_rows = sorted(mode_rows, key=lambda r: r.mean_nfe)
        x = [r.mean_nfe for r in mode_rows]
        y = [r.median_error for r in mode_rows]
        ax.plot(x, y, "o-", color=_MODE_COLORS.get(mode, None), label=mode)
    ax.set_xlabel("mean NFE per episode")
    ax.set_ylabel("median endpoint error")
    ax.set_yscale("log")
    ax.legend()
    ax.set_title("quality vs function evaluations")
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)


def plot_traces(results: list[EpisodeResult], path: str | Path, max_episodes: int = 4) -> None:
    """Per-step retrieval confidence, noise scale and NFE for a few episodes."""
    fig, axes = plt.subplots(3, 1, figsize=(6, 6), sharex=True)
    shown = 0
    for result in results:
        if not result.trace:
            continue
        steps = [t["step"] for t in result.trace]
        axes[0].plot(steps, [t["confidence"] for t in result.trace], alpha=0.8)
        axes[1].plot(steps, [t["noise_scale"] for t in result.trace], alpha=0.8)
        axes[2].step(steps, [t["nfe"] for t in result.trace], alpha=0.8, where="mid")
        shown += 1
        if shown >= max_episodes:
            break
    axes[0].set_ylabel("confidence")
    axes[1].set_ylabel("noise scale")
    axes[2].set_ylabel("NFE")
    axes[2].set_xlabel("chunk index")
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)


def plot_ablation(rows: list[SweepRow], path: str | Path) -> None:
    """Grouped success-rate bars per mode and split."""
    splits = sorted({r.split for r in rows})
    modes = []
    for r in rows:
        if r.cell.mode not in modes:
            modes.append(r.cell.mode)
    fig, ax = plt.subplots(figsize=(6, 4))
    width = 0.8 / max(1, len(splits))
    x = np.arange(len(modes))
    for j, split in enumerate(splits):
        vals = []
        for mode in modes:
            match = [r for r in rows if r.cell.mode == mode and r.split == split]
            vals.append(match[0].success_rate if match else np.nan)
        ax.bar(x + j * width, vals, width, label=split)
    ax.set_xticks(x + width * (len(splits) - 1) / 2)
    ax.set_xticklabels(modes)
    ax.set_ylabel("success rate")
    ax.set_ylim(0, 1.05)
    ax.legend()
    ax.set_title("initialization mode ablation")
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)
