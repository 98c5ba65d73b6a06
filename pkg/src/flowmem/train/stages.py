"""The three training stages and memory bank construction.

Stage 1 pretrains the velocity-field policy with a standard-normal source
so the learned field stays generalizable; retrieval only intervenes at
inference. Stage 2 trains the retrieval head contrastively on task-paired
batches while everything else stays frozen. Stage 3 freezes the policy and
the retrieval stack and regresses the consistency residual against
prior-replay targets along each demonstration.
"""

from __future__ import annotations

import time
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator

import numpy as np

from ..consistency.model import ConsistencyModel, residual_target, unrolled_loss_t
from ..flow.policy import FlowPolicy
from ..memory.bank import MemoryBank, MemoryEntry
from ..memory.embed import PriorHead, embed_context
from ..memory.prior import PriorConfig
from ..memory.session import session_begin, session_step
from ..nets import GradientReport, adamw_step, as_tensor, backward, mlp_apply
from ..seeding import rng_for
from ..tasks.dataset import Dataset, Demonstration
from ..tasks.families import CONTEXT_DIM
from .config import ModelConfig, StageConfig


class TrainingDivergenceError(RuntimeError):
    pass


@dataclass
class TrainLog:
    stage: int
    seed: int
    entries: list[tuple[int, float, float]] = field(default_factory=list)

    def record(self, step: int, loss: float, elapsed: float) -> None:
        if self.entries and step <= self.entries[-1][0]:
            raise ValueError("step indices must be strictly increasing")
        self.entries.append((step, float(loss), float(elapsed)))

    def losses(self) -> np.ndarray:
        return np.array([loss for _, loss, _ in self.entries])

    def smoothed_endpoints(self, window: int = 5) -> tuple[float, float]:
        """Means of the first and last `window` recorded losses."""
        losses = self.losses()
        w = min(window, len(losses))
        return float(losses[:w].mean()), float(losses[-w:].mean())

    def to_csv(self, path: str | Path) -> None:
        lines = ["step,loss,elapsed_s,seed"]
        for step, loss, elapsed in self.entries:
            lines.append(f"{step},{loss!r},{elapsed!r},{self.seed}")
        Path(path).write_text("\n".join(lines) + "\n")


def _check_finite(loss: float, stage: str, step: int) -> None:
    if not np.isfinite(loss):
        raise TrainingDivergenceError(
            f"{stage} diverged at step {step}: loss={loss}")


def _warmup_lr(cfg: StageConfig, step: int) -> float:
    """Linear warm-up over the declared ratio, cosine decay afterwards."""
    warm_steps = int(cfg.warmup_ratio * cfg.steps)
    if step < warm_steps:
        return cfg.lr * (step + 1) / warm_steps
    if cfg.steps <= warm_steps:
        return cfg.lr
    progress = (step - warm_steps) / (cfg.steps - warm_steps)
    return cfg.lr * 0.5 * (1.0 + np.cos(np.pi * progress))


def _log_interval(steps: int) -> int:
    return max(1, steps // 100)


# ---- stage 1: velocity-field pretraining ------------------------------------------


def action_normalization(dataset: Dataset) -> tuple[np.ndarray, np.ndarray]:
    rows = np.concatenate([d.trajectory for d in dataset.episodes("train")], axis=0)
    mean = rows.mean(axis=0)
    std = np.maximum(rows.std(axis=0), 1e-6)
    return mean, std


def stage1_train(dataset: Dataset, cfg: StageConfig, model_cfg: ModelConfig,
                 master_seed: int) -> tuple[FlowPolicy, TrainLog]:
    """Conditional flow matching from a standard-normal source."""
    demos = dataset.episodes("train")
    if not demos:
        raise ValueError("dataset has no training episodes")
    chunk_len = dataset.config.chunk_len
    mean, std = action_normalization(dataset)
    policy = FlowPolicy.create(
        chunk_len=chunk_len, action_dim=demos[0].trajectory.shape[1],
        ctx_dim=CONTEXT_DIM, hidden=model_cfg.policy_hidden,
        rng=rng_for(master_seed, "stage1", "init"),
        norm_mean=mean, norm_std=std, suite_fingerprint=dataset.fingerprint,
    )

    # flat views over all training episodes for vectorized batch gathers
    all_ctx = np.concatenate([d.contexts() for d in demos], axis=0)
    all_norm = np.concatenate([policy.normalize(d.trajectory) for d in demos], axis=0)
    offsets = np.concatenate([[0], np.cumsum([d.length for d in demos])])[:-1]
    max_start = np.array([d.length - chunk_len for d in demos])
    window = np.arange(chunk_len)

    rng = rng_for(master_seed, "stage1", "batches")
    log = TrainLog(stage=1, seed=master_seed)
    interval = _log_interval(cfg.steps)
    t0 = time.perf_counter()
    for step in range(cfg.steps):
        ep = rng.integers(0, len(demos), size=cfg.batch_size)
        w = rng.integers(0, max_start[ep] + 1)
        t = rng.uniform(0.0, 1.0, size=cfg.batch_size)
        x0 = rng.standard_normal((cfg.batch_size, chunk_len, policy.action_dim))
        rows = offsets[ep] + w
        x1 = all_norm[rows[:, None] + window]
        ctx = all_ctx[rows]
        loss, report = policy.cfm_loss(ctx, x0, x1, t)
        _check_finite(loss, "stage1", step)
        adamw_step(policy.params, report, lr=_warmup_lr(cfg, step),
                   weight_decay=cfg.weight_decay)
        if step % interval == 0 or step == cfg.steps - 1:
            log.record(step, loss, time.perf_counter() - t0)
    return policy, log


# ---- stage 2: contrastive retrieval head -------------------------------------------


def task_pair_batches(dataset: Dataset, batch_size: int, seed: int,
                      split: str = "train") -> Iterator[list[Demonstration]]:
    """Endless batches in which every item has a same-task partner.

    Batches are built from demo pairs drawn task-first, so each anchor is
    guaranteed at least one in-batch positive; everything from other tasks
    serves as negatives. Tasks with a single demonstration in the split
    are excluded with a warning.
    """
    if batch_size < 2 or batch_size % 2 != 0:
        raise ValueError("batch_size must be an even number >= 2")
    groups: dict[str, list[Demonstration]] = {}
    for demo in dataset.episodes(split):
        groups.setdefault(demo.task.task_id, []).append(demo)
    for task_id in [t for t, g in groups.items() if len(g) < 2]:
        warnings.warn(f"task {task_id} has a single demonstration; excluded "
                      "from pair batching")
        del groups[task_id]
    if not groups:
        raise ValueError("no task has at least two demonstrations")
    task_ids = sorted(groups)
    rng = rng_for(seed, "task-pairs", split)
    n_pairs = batch_size // 2
    while True:
        if len(task_ids) >= n_pairs:
            chosen = rng.choice(len(task_ids), size=n_pairs, replace=False)
        else:
            chosen = rng.choice(len(task_ids), size=n_pairs, replace=True)
        batch: list[Demonstration] = []
        for idx in chosen:
            group = groups[task_ids[idx]]
            a, b = rng.choice(len(group), size=2, replace=False)
            batch.extend([group[a], group[b]])
        yield batch


def infonce_loss(head: PriorHead, contexts: np.ndarray, task_ids: list[str],
                 tau_c: float) -> tuple[float, GradientReport]:
    """Multi-positive contrastive loss over unit-normalized embeddings.

    For each anchor, the numerator sums the exponentiated similarities of
    its same-task partners and the denominator those of every other batch
    item. Anchors without a positive are excluded from the average.
    """
    ctx = np.asarray(contexts, dtype=np.float64)
    b = ctx.shape[0]
    if b < 2 or len(task_ids) != b:
        raise ValueError("need a batch of >= 2 items with matching task ids")
    if tau_c <= 0:
        raise ValueError("tau_c must be positive")

    ids = np.asarray(task_ids)
    same = (ids[:, None] == ids[None, :])
    eye = np.eye(b, dtype=bool)
    pos_mask = (same & ~eye).astype(np.float64)
    cand_mask = (~eye).astype(np.float64)
    include = pos_mask.sum(axis=1) > 0
    if not include.any():
        raise ValueError("no anchor has an in-batch positive")

    leaves = head.params.leaves()
    z = mlp_apply(head.spec, leaves, as_tensor(ctx), prefix="head.")
    norms = (z * z).sum(axis=1, keepdims=True).sqrt()
    z_unit = z / norms
    logits = (z_unit @ z_unit.T) * (1.0 / tau_c)
    # Shift by the per-row max over candidates; push the self entry far
    # negative so it cannot overflow inside exp (it carries zero weight).
    row_max = np.max(np.where(eye, -np.inf, logits.value), axis=1, keepdims=True)
    shifted = (logits - as_tensor(row_max + (2.0 / tau_c + 10.0) * eye)).exp()
    num = (shifted * as_tensor(pos_mask)).sum(axis=1)
    den = (shifted * as_tensor(cand_mask)).sum(axis=1)
    per_anchor = den.log() - (num + as_tensor(~include * 1.0)).log()
    weights = include.astype(np.float64) / include.sum()
    loss = (per_anchor * as_tensor(weights)).sum()
    return float(loss.value), backward(loss, leaves)


def stage2_train(dataset: Dataset, cfg: StageConfig, model_cfg: ModelConfig,
                 master_seed: int) -> tuple[PriorHead, TrainLog]:
    """Train only the retrieval head; the context featurizer is fixed.

    Each sampled trajectory enters the batch under one of two views, its
    pooled episode context or the context of a random step. Bank keys are
    pooled contexts while episode-start queries are step contexts, so the
    head must put both views of a task in the same place for retrieval
    confidence to be meaningful.
    """
    head = PriorHead.create(ctx_dim=CONTEXT_DIM, hidden=model_cfg.head_hidden,
                            embed_dim=model_cfg.embed_dim,
                            rng=rng_for(master_seed, "stage2", "init"))
    mean_ctx = {d.episode_id: d.mean_context() for d in dataset.episodes("train")}
    batches = task_pair_batches(dataset, cfg.batch_size, master_seed)
    tau_c = cfg.tau_c if cfg.tau_c is not None else 0.07
    view_rng = rng_for(master_seed, "stage2", "views")

    log = TrainLog(stage=2, seed=master_seed)
    interval = _log_interval(cfg.steps)
    t0 = time.perf_counter()
    for step in range(cfg.steps):
        batch = next(batches)
        ctx = np.stack([
            mean_ctx[d.episode_id] if view_rng.random() < 0.5
            else d.step_context(int(view_rng.integers(0, d.length)))
            for d in batch
        ])
        ids = [d.task.task_id for d in batch]
        loss, report = infonce_loss(head, ctx, ids, tau_c)
        _check_finite(loss, "stage2", step)
        adamw_step(head.params, report, lr=_warmup_lr(cfg, step),
                   weight_decay=cfg.weight_decay)
        if step % interval == 0 or step == cfg.steps - 1:
            log.record(step, loss, time.perf_counter() - t0)
    return head, log


def contrastive_margin(head: PriorHead, dataset: Dataset,
                       split: str = "heldout") -> float:
    """Mean intra-task minus mean inter-task cosine similarity on a split."""
    demos = dataset.episodes(split)
    if len(demos) < 2:
        raise ValueError(f"split {split!r} needs at least two episodes")
    embeds = np.stack([embed_context(head, d.mean_context()) for d in demos])
    ids = np.asarray([d.task.task_id for d in demos])
    sims = embeds @ embeds.T
    same = ids[:, None] == ids[None, :]
    upper = np.triu(np.ones_like(sims, dtype=bool), k=1)
    intra = sims[same & upper]
    inter = sims[~same & upper]
    if intra.size == 0 or inter.size == 0:
        raise ValueError("split lacks intra- or inter-task pairs")
    return float(intra.mean() - inter.mean())


# ---- bank construction --------------------------------------------------------------


def build_memory_bank(dataset: Dataset, head: PriorHead,
                      window_len: int | None = None, stride: int = 1) -> MemoryBank:
    """One entry per training demonstration, keyed by its pooled embedding."""
    demos = dataset.episodes("train")
    if not demos:
        raise ValueError("cannot build a bank from an empty dataset")
    h0 = window_len if window_len is not None else dataset.config.chunk_len
    bank = MemoryBank(key_dim=head.embed_dim, action_dim=demos[0].trajectory.shape[1],
                      window_len=h0, stride=stride)
    for demo in demos:
        key = embed_context(head, demo.mean_context())
        bank.insert(MemoryEntry(key=key, trajectory=demo.trajectory, window_len=h0,
                                stride=stride, task_id=demo.task.task_id))
    return bank


# ---- stage 3: consistency residual ---------------------------------------------------


def replay_targets(dataset: Dataset, head: PriorHead, bank: MemoryBank,
                   prior_cfg: PriorConfig,
                   split: str = "train") -> list[list[tuple[np.ndarray, np.ndarray]]]:
    """Per-episode rollouts of (previous chunk, residual target).

    Progress advances along each demonstration exactly as an evaluation
    session does, so training and inference see identical prior alignment.
    """
    chunk_len = dataset.config.chunk_len
    rollouts = []
    for demo in dataset.episodes(split):
        n_chunks = demo.length // chunk_len
        if n_chunks < 1:
            continue
        t_ref = dataset.family_mean_length(demo.task.family)
        session = session_begin(bank, head, demo.step_context(0), prior_cfg, t_ref)
        rollout = []
        prev = np.zeros((chunk_len, demo.trajectory.shape[1]))
        for j in range(n_chunks):
            prior, _ = session_step(session, chunk_len, prior_cfg)
            gt = demo.trajectory[j * chunk_len:(j + 1) * chunk_len]
            rollout.append((prev, residual_target(gt, prior.mean)))
            prev = gt
        rollouts.append(rollout)
    return rollouts


def stage3_train(dataset: Dataset, head: PriorHead, bank: MemoryBank,
                 cfg: StageConfig, model_cfg: ModelConfig, prior_cfg: PriorConfig,
                 master_seed: int) -> tuple[ConsistencyModel, TrainLog]:
    """Regress the consistency residual; policy and retrieval stay frozen."""
    demos = dataset.episodes("train")
    if not demos:
        raise ValueError("dataset has no training episodes")
    model = ConsistencyModel.create(
        chunk_len=dataset.config.chunk_len, action_dim=demos[0].trajectory.shape[1],
        rng=rng_for(master_seed, "stage3", "init"),
        feat_dim=model_cfg.feat_dim, state_dim=model_cfg.state_dim,
        p_cold=cfg.p_cold if cfg.p_cold is not None else 0.1,
    )
    rollouts = replay_targets(dataset, head, bank, prior_cfg)
    if not rollouts:
        raise ValueError("no episode is long enough for a single chunk")

    rng = rng_for(master_seed, "stage3", "batches")
    log = TrainLog(stage=3, seed=master_seed)
    interval = _log_interval(cfg.steps)
    t0 = time.perf_counter()
    for step in range(cfg.steps):
        leaves = model.params.leaves()
        picks = rng.integers(0, len(rollouts), size=cfg.batch_size)
        total = None
        for idx in picks:
            term = unrolled_loss_t(model, leaves, rollouts[idx],
                                   p_cold=model.p_cold, rng=rng)
            total = term if total is None else total + term
        loss_t = total * (1.0 / cfg.batch_size)
        report = backward(loss_t, leaves)
        _check_finite(report.loss, "stage3", step)
        adamw_step(model.params, report, lr=_warmup_lr(cfg, step),
                   weight_decay=cfg.weight_decay)
        if step % interval == 0 or step == cfg.steps - 1:
            log.record(step, report.loss, time.perf_counter() - t0)
    return model, log
