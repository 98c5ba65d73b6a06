"""Task-level prior construction and the confidence-adaptive schedules.

Retrieved neighbor trajectories are aligned to episode progress, resampled
to the policy horizon, and moment-matched into a diagonal Gaussian. The
softmax-weighted mean similarity drives both the noise scale and the step
count of the sampler: high confidence means less noise and fewer steps.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .bank import MemoryEntry

CONFIDENCE_SLACK = 1e-6


@dataclass(frozen=True)
class PriorConfig:
    """Retrieval and sampling constants shared by sessions and training."""

    k: int = 8
    tau_s: float = 0.1
    var_floor: float = 1e-4
    noise_min: float = 0.05
    noise_max: float = 1.0
    nfe_min: int = 2
    nfe_max: int = 10

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if self.tau_s <= 0:
            raise ValueError("tau_s must be positive")
        if self.var_floor <= 0:
            raise ValueError("var_floor must be positive")
        if self.noise_min > self.noise_max:
            raise ValueError("noise_min must not exceed noise_max")
        if not (1 <= self.nfe_min <= self.nfe_max):
            raise ValueError("need 1 <= nfe_min <= nfe_max")


@dataclass(frozen=True)
class TaskPrior:
    mean: np.ndarray        # (H, A)
    var: np.ndarray         # (H, A), floored
    confidence: float       # weighted mean retrieval similarity

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=np.float64)
        var = np.asarray(self.var, dtype=np.float64)
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "var", var)
        if mean.shape != var.shape:
            raise ValueError("mean and var must share a shape")
        if np.any(var <= 0):
            raise ValueError("variances must be strictly positive after flooring")


@dataclass(frozen=True)
class SamplerSchedule:
    noise_scale: float     # lambda
    n_steps: int           # adaptive NFE


def weights_and_similarity(scores, tau_s: float) -> tuple[np.ndarray, float]:
    """Softmax weights over retrieval scores plus their weighted mean.

    Computed with max subtraction so extreme score/temperature ratios stay
    finite.
    """
    s = np.asarray(scores, dtype=np.float64)
    if s.ndim != 1 or s.size == 0:
        raise ValueError("scores must be a non-empty vector")
    if not np.all(np.isfinite(s)):
        raise ValueError("scores must be finite")
    if tau_s <= 0:
        raise ValueError(f"tau_s must be positive, got {tau_s}")
    z = s / tau_s
    z = z - z.max()
    e = np.exp(z)
    alpha = e / e.sum()
    return alpha, float(alpha @ s)


def _check_confidence(s_bar: float) -> float:
    s = float(s_bar)
    if abs(s) > 1.0 + CONFIDENCE_SLACK:
        raise ValueError(f"confidence {s} outside [-1, 1]")
    if abs(s) > 1.0:
        warnings.warn(f"confidence {s} clamped to [-1, 1]", stacklevel=3)
        s = max(-1.0, min(1.0, s))
    return s


def noise_schedule(s_bar: float, noise_min: float, noise_max: float) -> float:
    """Affine map from confidence to noise scale, non-increasing in s_bar."""
    if noise_min > noise_max:
        raise ValueError("noise_min must not exceed noise_max")
    s = _check_confidence(s_bar)
    return noise_max - ((s + 1.0) / 2.0) * (noise_max - noise_min)


def nfe_schedule_raw(s_bar: float, nfe_min: int, nfe_max: int) -> float:
    """Pre-rounding step count; shares monotonicity with the noise schedule."""
    if not (1 <= nfe_min <= nfe_max):
        raise ValueError("need 1 <= nfe_min <= nfe_max")
    s = _check_confidence(s_bar)
    return nfe_min + (1.0 - (s + 1.0) / 2.0) * (nfe_max - nfe_min)


def nfe_schedule(s_bar: float, nfe_min: int, nfe_max: int) -> int:
    """Integer step count, rounded half away from zero, clipped to bounds."""
    raw = nfe_schedule_raw(s_bar, nfe_min, nfe_max)
    n = int(np.floor(raw + 0.5))  # raw is always positive here
    return int(min(max(n, nfe_min), nfe_max))


def extract_aligned_chunk(entry: MemoryEntry, rho: float) -> np.ndarray:
    """Sliding window of the stored trajectory aligned to progress rho.

    With N windows of length H0 and stride Delta, progress selects window
    u = floor(rho * (N - 1)) and returns rows [u*Delta, u*Delta + H0).
    """
    r = float(rho)
    if not 0.0 <= r <= 1.0:
        raise ValueError(f"progress must lie in [0, 1], got {rho}")
    u = int(np.floor(r * (entry.n_windows - 1)))
    start = u * entry.stride
    return entry.trajectory[start:start + entry.window_len].copy()


def resample_chunk(block: np.ndarray, chunk_len: int) -> np.ndarray:
    """Per-dimension linear resampling of an (H0, A) block onto H rows."""
    arr = np.asarray(block, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[0] < 1:
        raise ValueError("block must be (H0, A) with H0 >= 1")
    h = int(chunk_len)
    if h < 1:
        raise ValueError("chunk_len must be >= 1")
    h0 = arr.shape[0]
    if h0 == h:
        return arr.copy()
    if h0 == 1:
        return np.repeat(arr, h, axis=0)
    src = np.linspace(0.0, 1.0, h0)
    dst = np.linspace(0.0, 1.0, h)
    return np.stack([np.interp(dst, src, arr[:, j]) for j in range(arr.shape[1])], axis=1)


def compose_prior(chunks: list[np.ndarray], alpha: np.ndarray, var_floor: float,
                  confidence: float = 0.0) -> TaskPrior:
    """Weighted first and second moments of aligned chunks, variance floored."""
    a = np.asarray(alpha, dtype=np.float64)
    if len(chunks) != a.size or len(chunks) == 0:
        raise ValueError("need one weight per chunk")
    if abs(a.sum() - 1.0) > 1e-9:
        raise ValueError("weights must sum to 1")
    stacked = np.stack([np.asarray(c, dtype=np.float64) for c in chunks], axis=0)
    if stacked.ndim != 3:
        raise ValueError("chunks must share an (H, A) shape")
    mean = np.einsum("i,ihw->hw", a, stacked)
    var = np.einsum("i,ihw->hw", a, (stacked - mean) ** 2)
    return TaskPrior(mean=mean, var=np.maximum(var, var_floor), confidence=confidence)


def sample_prior_init(prior: TaskPrior, schedule: SamplerSchedule,
                      rng: np.random.Generator | int) -> np.ndarray:
    """Draw mean + noise_scale * (eps * sqrt(var)) with seeded standard noise."""
    gen = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)
    eps = gen.standard_normal(prior.mean.shape)
    return prior.mean + schedule.noise_scale * (eps * np.sqrt(prior.var))
