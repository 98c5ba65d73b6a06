"""Benchmark sweeps over (mode, NFE) cells and the mode ablation table.

Episodes are paired across grid cells: cell i of every row sees the same
task descriptor and reference length, so differences between rows are
differences between modes, not between episode draws. Wall-clock timings
are collected but kept out of the deterministic CSV; they land in a
sidecar timing file because elapsed time is hardware noise, while NFE is
the portable cost measure.
"""

from __future__ import annotations

import csv
import io
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..memory.prior import PriorConfig
from ..seeding import rng_for
from ..tasks.dataset import Dataset
from .rollout import MODES, ArtifactBundle, EpisodeResult, rollout_episode

SWEEP_CSV_VERSION = 1

SWEEP_COLUMNS = ("csv_version", "mode", "nfe", "split", "episodes", "mean_error",
                 "median_error", "success_rate", "mean_nfe", "mean_discontinuity")
ABLATION_COLUMNS = ("csv_version", "mode", "split", "episodes", "success_rate",
                    "median_error", "median_discontinuity")
TIMING_COLUMNS = ("mode", "nfe", "split", "wall_s_per_chunk")


@dataclass(frozen=True)
class SweepCell:
    mode: str
    nfe_override: int | None  # None means the adaptive schedule


@dataclass
class SweepRow:
    cell: SweepCell
    split: str
    episodes: int
    mean_error: float
    median_error: float
    success_rate: float
    mean_nfe: float
    mean_discontinuity: float
    wall_s_per_chunk: float
    results: list[EpisodeResult]


def default_grid(nfe_grid: tuple[int, ...], with_lcm: bool) -> list[SweepCell]:
    cells = [SweepCell("gaussian-init", n) for n in nfe_grid]
    cells.append(SweepCell("gpm-init", None))
    if with_lcm:
        cells.append(SweepCell("gpm+lcm", None))
    return cells


def episode_tasks(dataset: Dataset, split: str, episodes: int, seed: int):
    """The shared per-episode task ladder for one (split, seed) pairing."""
    pool = dataset.tasks(split)
    if not pool:
        raise ValueError(f"no tasks in split {split!r}")
    out = []
    for i in range(episodes):
        idx = int(rng_for(seed, "episode-task", split, i).integers(0, len(pool)))
        task = pool[idx]
        out.append((task, dataset.family_mean_length(task.family)))
    return out


def run_cell(bundle: ArtifactBundle, dataset: Dataset, cell: SweepCell, split: str,
             episodes: int, seed: int, prior_cfg: PriorConfig,
             success_threshold: float) -> SweepRow:
    results = []
    t0 = time.perf_counter()
    n_chunks_total = 0
    for i, (task, t_ref) in enumerate(episode_tasks(dataset, split, episodes, seed)):
        rng = rng_for(seed, "episode-roll", split, i)
        result = rollout_episode(task, t_ref, bundle, cell.mode, prior_cfg, rng,
                                 nfe_override=cell.nfe_override,
                                 success_threshold=success_threshold)
        n_chunks_total += len(result.chunks)
        results.append(result)
    elapsed = time.perf_counter() - t0

    errors = np.array([r.endpoint_error for r in results])
    discs = [r.discontinuity for r in results if r.discontinuity is not None]
    return SweepRow(
        cell=cell, split=split, episodes=episodes,
        mean_error=float(errors.mean()),
        median_error=float(np.median(errors)),
        success_rate=float(np.mean([r.success for r in results])),
        mean_nfe=float(np.mean([r.total_nfe for r in results])),
        mean_discontinuity=float(np.mean(discs)) if discs else float("nan"),
        wall_s_per_chunk=elapsed / max(1, n_chunks_total),
        results=results,
    )


def sweep(bundle: ArtifactBundle, dataset: Dataset, grid: list[SweepCell], split: str,
          episodes: int, seed: int, prior_cfg: PriorConfig,
          success_threshold: float = 0.05) -> list[SweepRow]:
    return [run_cell(bundle, dataset, cell, split, episodes, seed, prior_cfg,
                     success_threshold) for cell in grid]


def ablation_report(bundle: ArtifactBundle, dataset: Dataset, splits: tuple[str, ...],
                    episodes: int, seed: int, prior_cfg: PriorConfig,
                    success_threshold: float = 0.05) -> list[SweepRow]:
    """All three modes at their native schedules, per split, paired seeds."""
    rows = []
    for mode in MODES:
        nfe = prior_cfg.nfe_max if mode == "gaussian-init" else None
        for split in splits:
            rows.append(run_cell(bundle, dataset, SweepCell(mode, nfe), split,
                                 episodes, seed, prior_cfg, success_threshold))
    return rows


# ---- delimited output ---------------------------------------------------------------


def _fmt(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _write_csv(path: Path, columns: tuple[str, ...], rows: list[dict]) -> None:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_fmt(row[c]) for c in columns])
    path.write_text(buf.getvalue())


def sweep_to_csv(rows: list[SweepRow], path: str | Path) -> None:
    records = [{
        "csv_version": SWEEP_CSV_VERSION,
        "mode": r.cell.mode,
        "nfe": "adaptive" if r.cell.nfe_override is None else r.cell.nfe_override,
        "split": r.split,
        "episodes": r.episodes,
        "mean_error": r.mean_error,
        "median_error": r.median_error,
        "success_rate": r.success_rate,
        "mean_nfe": r.mean_nfe,
        "mean_discontinuity": r.mean_discontinuity,
    } for r in rows]
    _write_csv(Path(path), SWEEP_COLUMNS, records)


def timing_to_csv(rows: list[SweepRow], path: str | Path) -> None:
    records = [{
        "mode": r.cell.mode,
        "nfe": "adaptive" if r.cell.nfe_override is None else r.cell.nfe_override,
        "split": r.split,
        "wall_s_per_chunk": r.wall_s_per_chunk,
    } for r in rows]
    _write_csv(Path(path), TIMING_COLUMNS, records)


def ablation_to_csv(rows: list[SweepRow], path: str | Path) -> None:
    records = []
    for r in rows:
        discs = [res.discontinuity for res in r.results if res.discontinuity is not None]
        records.append({
            "csv_version": SWEEP_CSV_VERSION,
            "mode": r.cell.mode,
            "split": r.split,
            "episodes": r.episodes,
            "success_rate": r.success_rate,
            "median_error": r.median_error,
            "median_discontinuity": float(np.median(discs)) if discs else float("nan"),
        })
    _write_csv(Path(path), ABLATION_COLUMNS, records)


def episodes_to_csv(results: list[EpisodeResult], path: str | Path) -> None:
    columns = ("episode", "task_id", "endpoint_error", "success", "total_nfe",
               "discontinuity")
    records = [{
        "episode": i,
        "task_id": r.task_id,
        "endpoint_error": r.endpoint_error,
        "success": int(r.success),
        "total_nfe": r.total_nfe,
        "discontinuity": r.discontinuity if r.discontinuity is not None else "",
    } for i, r in enumerate(results)]
    _write_csv(Path(path), columns, records)
