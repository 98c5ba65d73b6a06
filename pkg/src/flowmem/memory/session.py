"""Per-episode retrieval cache.

Retrieval runs once when an episode starts; afterwards each control step
only gathers progress-aligned chunks from the cached neighbors and
recomposes the prior, so the bank is never re-queried mid-episode. A
session belongs to exactly one episode and is not shared.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .bank import MemoryBank, MemoryEntry
from .embed import PriorHead, embed_context
from .prior import (
    PriorConfig,
    SamplerSchedule,
    TaskPrior,
    compose_prior,
    extract_aligned_chunk,
    nfe_schedule,
    noise_schedule,
    resample_chunk,
    weights_and_similarity,
)


@dataclass
class EpisodeSession:
    entries: list[MemoryEntry]
    weights: np.ndarray
    confidence: float
    t_ref: float
    progress: float = 0.0
    steps_taken: int = 0
    trace: list = field(default_factory=list)


def session_begin(bank: MemoryBank, head: PriorHead, context: np.ndarray,
                  cfg: PriorConfig, t_ref: float) -> EpisodeSession:
    """Embed the episode context, retrieve once, and cache the neighbors."""
    if t_ref <= 0:
        raise ValueError("t_ref must be positive")
    query = embed_context(head, context)
    hits = bank.retrieve_topk(query, cfg.k)
    scores = np.array([score for _, score in hits])
    alpha, s_bar = weights_and_similarity(scores, cfg.tau_s)
    return EpisodeSession(entries=[entry for entry, _ in hits], weights=alpha,
                          confidence=s_bar, t_ref=float(t_ref))


def session_step(session: EpisodeSession, chunk_len: int,
                 cfg: PriorConfig) -> tuple[TaskPrior, SamplerSchedule]:
    """Prior and schedule for the current progress, then advance progress.

    Chunks are gathered from the cached entries at the current progress
    scalar and the prior is recomposed from scratch; the schedule depends
    only on the cached confidence, so it is constant within an episode.
    Progress then advances by one executed chunk: chunk_len / t_ref,
    clamped to 1.
    """
    chunks = [
        resample_chunk(extract_aligned_chunk(entry, session.progress), chunk_len)
        for entry in session.entries
    ]
    prior = compose_prior(chunks, session.weights, cfg.var_floor,
                          confidence=session.confidence)
    schedule = SamplerSchedule(
        noise_scale=noise_schedule(session.confidence, cfg.noise_min, cfg.noise_max),
        n_steps=nfe_schedule(session.confidence, cfg.nfe_min, cfg.nfe_max),
    )
    session.progress = min(1.0, session.progress + chunk_len / session.t_ref)
    session.steps_taken += 1
    return prior, schedule
