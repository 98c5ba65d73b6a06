"""Episode execution for the three initialization modes.

A rollout repeatedly featurizes the current state, builds the generative
starting chunk for the chosen mode, lets the policy transport it, and
executes the resulting chunk. Modes:

    gaussian-init   standard-normal start at unit noise, fixed step count
    gpm-init        session-cached retrieval prior with adaptive noise/steps
    gpm+lcm         same, plus the consistency bias added to the start

Each episode owns its session, consistency state and random stream, so
episodes are independent and may run concurrently.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..consistency.model import ConsistencyModel, consistency_forward, inject_bias, lcm_step
from ..flow.policy import FlowPolicy
from ..memory.bank import MemoryBank
from ..memory.embed import PriorHead
from ..memory.prior import PriorConfig, sample_prior_init
from ..memory.session import session_begin, session_step
from ..tasks.families import TaskDescriptor, WORKSPACE_SCALE, featurize, observation

MODES = ("gaussian-init", "gpm-init", "gpm+lcm")


class MissingArtifactError(ValueError):
    """The chosen mode needs an artifact that was not supplied."""


@dataclass
class ArtifactBundle:
    policy: FlowPolicy
    head: PriorHead | None = None
    bank: MemoryBank | None = None
    lcm: ConsistencyModel | None = None

    def require(self, mode: str) -> None:
        if mode not in MODES:
            raise ValueError(f"unknown mode {mode!r}")
        if mode in ("gpm-init", "gpm+lcm") and (self.head is None or self.bank is None):
            raise MissingArtifactError(f"mode {mode} needs a prior head and a memory bank")
        if mode == "gpm+lcm" and self.lcm is None:
            raise MissingArtifactError("mode gpm+lcm needs a consistency checkpoint")


@dataclass(frozen=True)
class RolloutConfig:
    mode: str
    episodes: int
    seed: int
    split: str = "seen"
    nfe_override: int | None = None
    success_threshold: float = 0.05
    trace: bool = False

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.split not in ("seen", "unseen"):
            raise ValueError(f"split must be seen or unseen, got {self.split!r}")
        if self.episodes < 1:
            raise ValueError("episodes must be >= 1")


def check_nfe_override(nfe_override: int | None, cfg: PriorConfig) -> None:
    if nfe_override is not None and not 1 <= nfe_override <= cfg.nfe_max:
        raise ValueError(f"NFE override must lie in [1, {cfg.nfe_max}]")


@dataclass
class EpisodeResult:
    task_id: str
    endpoint_error: float
    success: bool
    total_nfe: int
    discontinuity: float | None
    chunks: list[np.ndarray] = field(default_factory=list, repr=False)
    trace: list[dict] = field(default_factory=list)
    retrievals: int = 0
    lcm_calls: int = 0


def discontinuity_metric(chunks: list[np.ndarray]) -> float | None:
    """Mean boundary jump between consecutive executed chunks.

    Undefined (None) for fewer than two chunks. Only the last row of one
    chunk and the first row of the next matter.
    """
    if len(chunks) < 2:
        return None
    jumps = [float(np.linalg.norm(chunks[i][-1] - chunks[i + 1][0]))
             for i in range(len(chunks) - 1)]
    return float(np.mean(jumps))


def rollout_episode(task: TaskDescriptor, t_ref: float, bundle: ArtifactBundle,
                    mode: str, prior_cfg: PriorConfig, rng: np.random.Generator,
                    nfe_override: int | None = None,
                    success_threshold: float = 0.05) -> EpisodeResult:
    bundle.require(mode)
    check_nfe_override(nfe_override, prior_cfg)
    policy = bundle.policy
    chunk_len, action_dim = policy.chunk_len, policy.action_dim
    n_chunks = max(1, math.ceil(t_ref / chunk_len))

    nfe_before = policy.nfe_count
    bank_before = bundle.bank.retrieval_count if bundle.bank is not None else 0
    lcm_before = bundle.lcm.call_count if bundle.lcm is not None else 0

    session = None
    lcm_state = bundle.lcm.initial_state() if mode == "gpm+lcm" else None
    prev_chunk = np.zeros((chunk_len, action_dim))
    position = task.start.copy()
    chunks: list[np.ndarray] = []
    trace: list[dict] = []
    nfe_claimed = 0

    for step_index in range(n_chunks):
        context = featurize(task, observation(task, position))
        if mode == "gaussian-init":
            n_steps = nfe_override if nfe_override is not None else prior_cfg.nfe_max
            init = policy.denormalize(rng.standard_normal((chunk_len, action_dim)))
        else:
            if session is None:
                session = session_begin(bundle.bank, bundle.head, context,
                                        prior_cfg, t_ref)
            prior, schedule = session_step(session, chunk_len, prior_cfg)
            n_steps = nfe_override if nfe_override is not None else schedule.n_steps
            init = sample_prior_init(prior, schedule, rng)
            trace.append({"step": step_index, "confidence": session.confidence,
                          "noise_scale": schedule.noise_scale, "nfe": n_steps})
            if mode == "gpm+lcm":
                features = consistency_forward(bundle.lcm, prev_chunk)
                lcm_state, bias = lcm_step(bundle.lcm, lcm_state, features)
                init = inject_bias(init, bias)
        chunk = policy.generate(context, init, n_steps)
        nfe_claimed += n_steps
        chunks.append(chunk)
        position = chunk[-1].copy()
        prev_chunk = chunk

    total_nfe = policy.nfe_count - nfe_before
    if total_nfe != nfe_claimed:
        raise AssertionError(f"NFE accounting broke: counter delta {total_nfe} "
                             f"vs per-chunk sum {nfe_claimed}")
    error = float(np.linalg.norm(position - task.goal))
    return EpisodeResult(
        task_id=task.task_id,
        endpoint_error=error,
        success=error < success_threshold * WORKSPACE_SCALE,
        total_nfe=total_nfe,
        discontinuity=discontinuity_metric(chunks),
        chunks=chunks,
        trace=trace,
        retrievals=(bundle.bank.retrieval_count - bank_before) if bundle.bank is not None else 0,
        lcm_calls=(bundle.lcm.call_count - lcm_before) if bundle.lcm is not None else 0,
    )
