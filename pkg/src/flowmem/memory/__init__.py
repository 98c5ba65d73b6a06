from .bank import BANK_MAGIC, BankCorruptError, BankFormatError, MemoryBank, MemoryEntry
from .embed import DegenerateEmbeddingError, PriorHead, embed_context, mean_pool, unit_normalize
from .prior import (
    PriorConfig,
    SamplerSchedule,
    TaskPrior,
    compose_prior,
    extract_aligned_chunk,
    nfe_schedule,
    nfe_schedule_raw,
    noise_schedule,
    resample_chunk,
    sample_prior_init,
    weights_and_similarity,
)
from .session import EpisodeSession, session_begin, session_step

__all__ = [
    "BANK_MAGIC", "BankCorruptError", "BankFormatError", "MemoryBank", "MemoryEntry",
    "DegenerateEmbeddingError", "PriorHead", "embed_context", "mean_pool", "unit_normalize",
    "PriorConfig", "SamplerSchedule", "TaskPrior", "compose_prior", "extract_aligned_chunk",
    "nfe_schedule", "nfe_schedule_raw", "noise_schedule", "resample_chunk",
    "sample_prior_init", "weights_and_similarity",
    "EpisodeSession", "session_begin", "session_step",
]
