"""Demonstration dataset generation, splits and persistence.

The builder lays out a grid of task instances per family, rolls expert
demonstrations for each, and partitions every episode into exactly one of
three splits:

    train     demonstrations that feed all training stages and the bank
    heldout   extra demonstrations of training tasks, for validation
    unseen    every demonstration of held-out families and of tasks drawn
              from the held-out parameter region of seen families

The whole dataset is a pure function of (config, master seed); the binary
trajectory store hashes to a suite fingerprint that downstream checkpoints
embed and verify.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from ..container import read_container, write_container
from ..memory.embed import mean_pool
from ..seeding import rng_for, stream_key
from .families import (
    ACTION_DIM,
    CONTEXT_DIM,
    FAMILIES,
    N_FAMILIES,
    TaskDescriptor,
    expert_trajectory,
    featurize,
    observation,
    sample_task,
)

MANIFEST_NAME = "manifest.json"
TRAJECTORIES_NAME = "trajectories.bin"

SPLITS = ("train", "heldout", "unseen")


@dataclass(frozen=True)
class DatasetConfig:
    families: int = 8
    tasks_per_family: int = 3
    demos_per_task: int = 20
    heldout_fraction: float = 0.2
    unseen_families: int = 1
    unseen_tasks_per_family: int = 1
    unseen_demos_per_task: int = 5
    chunk_len: int = 8
    length_min: int = 32
    length_max: int = 64
    noise_sigma: float = 0.01
    wobble_sigma: float = 0.025

    def validate(self) -> None:
        if not 2 <= self.families <= N_FAMILIES:
            raise ValueError(f"families must be in [2, {N_FAMILIES}]")
        if not 0 <= self.unseen_families < self.families:
            raise ValueError("unseen_families must leave at least one seen family")
        if self.tasks_per_family < 1 or self.demos_per_task < 2:
            raise ValueError("need >= 1 task per family and >= 2 demos per task")
        if self.unseen_tasks_per_family < 0 or self.unseen_demos_per_task < 1:
            raise ValueError("unseen task/demo counts are out of range")
        if not 0.0 <= self.heldout_fraction < 1.0:
            raise ValueError("heldout_fraction must lie in [0, 1)")
        if not 2 <= self.length_min <= self.length_max:
            raise ValueError("need 2 <= length_min <= length_max")
        if self.chunk_len < 1 or self.chunk_len > self.length_min:
            raise ValueError("chunk_len must be in [1, length_min]")
        if self.noise_sigma < 0 or self.wobble_sigma < 0:
            raise ValueError("noise scales must be non-negative")


@dataclass(frozen=True)
class Demonstration:
    episode_id: int
    task: TaskDescriptor
    trajectory: np.ndarray
    split: str

    @property
    def length(self) -> int:
        return int(self.trajectory.shape[0])

    def position_before(self, step: int) -> np.ndarray:
        """Where the agent stands when it is about to emit row `step`."""
        return self.task.start if step == 0 else self.trajectory[step - 1]

    def step_context(self, step: int) -> np.ndarray:
        return featurize(self.task, observation(self.task, self.position_before(step)))

    def contexts(self) -> np.ndarray:
        return np.stack([self.step_context(s) for s in range(self.length)])

    def mean_context(self) -> np.ndarray:
        return mean_pool(self.contexts())


@dataclass
class Dataset:
    config: DatasetConfig
    master_seed: int
    demos: list[Demonstration]
    task_splits: dict[str, str] = field(default_factory=dict)
    fingerprint: str = ""

    def episodes(self, split: str) -> list[Demonstration]:
        if split not in SPLITS:
            raise ValueError(f"unknown split {split!r}")
        return [d for d in self.demos if d.split == split]

    def tasks(self, split: str) -> list[TaskDescriptor]:
        seen_ids: set[str] = set()
        out = []
        for demo in self.demos:
            wanted = (demo.split == "unseen") if split == "unseen" else (demo.split != "unseen")
            if wanted and demo.task.task_id not in seen_ids:
                seen_ids.add(demo.task.task_id)
                out.append(demo.task)
        return out

    def task_length(self, task_id: str) -> int:
        for demo in self.demos:
            if demo.task.task_id == task_id:
                return demo.length
        raise KeyError(task_id)

    def family_mean_length(self, family: int) -> float:
        lengths = {d.task.task_id: d.length for d in self.demos if d.task.family == family}
        if not lengths:
            raise KeyError(f"no tasks of family {family}")
        return float(np.mean(list(lengths.values())))


def build_dataset(config: DatasetConfig, master_seed: int) -> Dataset:
    config.validate()
    demos: list[Demonstration] = []
    task_splits: dict[str, str] = {}
    episode_id = 0

    def roll(task: TaskDescriptor, length: int, n_demos: int, splits: list[str]) -> None:
        nonlocal episode_id
        for d in range(n_demos):
            rng = rng_for(master_seed, "demo", task.task_id, d)
            traj = expert_trajectory(task, length, config.noise_sigma, rng,
                                     wobble_sigma=config.wobble_sigma)
            demos.append(Demonstration(episode_id=episode_id, task=task,
                                       trajectory=traj, split=splits[d]))
            episode_id += 1

    n_heldout = int(round(config.heldout_fraction * config.demos_per_task))
    n_heldout = min(n_heldout, config.demos_per_task - 2)
    seen_splits = ["train"] * (config.demos_per_task - n_heldout) + ["heldout"] * n_heldout

    def family_length(fam: int) -> int:
        # One demonstration length per family, preferring whole chunks so
        # episode progress lines up with the executed chunk grid.
        candidates = [n for n in range(config.length_min, config.length_max + 1)
                      if n % config.chunk_len == 0]
        if not candidates:
            candidates = list(range(config.length_min, config.length_max + 1))
        pick = rng_for(master_seed, "length", fam).integers(0, len(candidates))
        return int(candidates[pick])

    n_seen_families = config.families - config.unseen_families
    for fam in range(config.families):
        fam_name = FAMILIES[fam].name
        seen_family = fam < n_seen_families
        length = family_length(fam)
        for i in range(config.tasks_per_family):
            region = "main"
            task_id = f"{fam_name}/s{i:02d}" if seen_family else f"{fam_name}/uf{i:02d}"
            seed = stream_key(master_seed, "task", fam, region, i) % (2**31)
            task = sample_task(fam, seed, param_region=region, task_id=task_id)
            if seen_family:
                task_splits[task_id] = "seen"
                roll(task, length, config.demos_per_task, seen_splits)
            else:
                task_splits[task_id] = "unseen"
                roll(task, length, config.unseen_demos_per_task,
                     ["unseen"] * config.unseen_demos_per_task)
        if seen_family:
            for j in range(config.unseen_tasks_per_family):
                task_id = f"{fam_name}/ue{j:02d}"
                seed = stream_key(master_seed, "task", fam, "edge", j) % (2**31)
                task = sample_task(fam, seed, param_region="edge", task_id=task_id)
                task_splits[task_id] = "unseen"
                roll(task, length, config.unseen_demos_per_task,
                     ["unseen"] * config.unseen_demos_per_task)

    return Dataset(config=config, master_seed=master_seed, demos=demos,
                   task_splits=task_splits)


# ---- persistence ------------------------------------------------------------------


def _task_record(task: TaskDescriptor) -> dict:
    return {
        "family": task.family,
        "task_id": task.task_id,
        "start": task.start.tolist(),
        "goal": task.goal.tolist(),
        "via": task.via.tolist(),
        "scale": task.scale,
        "seed": task.seed,
    }


def save_dataset(dataset: Dataset, out_dir: str | Path) -> str:
    """Write manifest + binary store; returns the suite fingerprint."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    lengths = np.array([d.length for d in dataset.demos], dtype=np.int64)
    actions = np.concatenate([d.trajectory for d in dataset.demos], axis=0)
    traj_path = out / TRAJECTORIES_NAME
    write_container(traj_path, kind="dataset-trajectories",
                    meta={"n_episodes": len(dataset.demos), "action_dim": ACTION_DIM},
                    arrays={"lengths": lengths, "actions": actions})
    fingerprint = hashlib.sha256(traj_path.read_bytes()).hexdigest()
    dataset.fingerprint = fingerprint

    tasks = {}
    for demo in dataset.demos:
        tasks.setdefault(demo.task.task_id, _task_record(demo.task))
    manifest = {
        "format_version": 1,
        "master_seed": dataset.master_seed,
        "config": asdict(dataset.config),
        "fingerprint": fingerprint,
        "context_dim": CONTEXT_DIM,
        "task_splits": dataset.task_splits,
        "tasks": tasks,
        "family_mean_length": {
            str(fam): dataset.family_mean_length(fam)
            for fam in sorted({d.task.family for d in dataset.demos})
        },
        "episodes": [
            {"id": d.episode_id, "task_id": d.task.task_id, "split": d.split,
             "length": d.length}
            for d in dataset.demos
        ],
    }
    (out / MANIFEST_NAME).write_text(json.dumps(manifest, sort_keys=True, indent=1) + "\n")
    return fingerprint


def load_dataset(data_dir: str | Path) -> Dataset:
    data = Path(data_dir)
    manifest = json.loads((data / MANIFEST_NAME).read_text())
    traj_path = data / TRAJECTORIES_NAME
    fingerprint = hashlib.sha256(traj_path.read_bytes()).hexdigest()
    if fingerprint != manifest["fingerprint"]:
        raise ValueError(f"{traj_path}: fingerprint mismatch against manifest")
    _, meta, arrays = read_container(traj_path)

    tasks = {
        tid: TaskDescriptor(family=rec["family"], task_id=rec["task_id"],
                            start=np.array(rec["start"]), goal=np.array(rec["goal"]),
                            via=np.array(rec["via"]), scale=rec["scale"], seed=rec["seed"])
        for tid, rec in manifest["tasks"].items()
    }
    lengths = arrays["lengths"]
    actions = arrays["actions"]
    offsets = np.concatenate([[0], np.cumsum(lengths)])
    demos = []
    for record in manifest["episodes"]:
        i = record["id"]
        demos.append(Demonstration(
            episode_id=i, task=tasks[record["task_id"]],
            trajectory=actions[offsets[i]:offsets[i + 1]].copy(),
            split=record["split"],
        ))
    dataset = Dataset(config=DatasetConfig(**manifest["config"]),
                      master_seed=manifest["master_seed"], demos=demos,
                      task_splits=manifest["task_splits"], fingerprint=fingerprint)
    return dataset
