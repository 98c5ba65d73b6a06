"""Straight-line transport path and the fixed-step Euler solver."""

from __future__ import annotations

from typing import Callable

import numpy as np


def _check_chunk(x: np.ndarray, name: str) -> np.ndarray:
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ValueError(f"{name} must be a (H, A) matrix with H, A >= 1")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite entries")
    return arr


def ot_interpolate(x0: np.ndarray, x1: np.ndarray, t: float) -> np.ndarray:
    """Point on the straight path between x0 and x1 at time t in [0, 1]."""
    a = _check_chunk(x0, "x0")
    b = _check_chunk(x1, "x1")
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch {a.shape} vs {b.shape}")
    t = float(t)
    if not 0.0 <= t <= 1.0:
        raise ValueError(f"t must lie in [0, 1], got {t}")
    return (1.0 - t) * a + t * b


def target_velocity(x0: np.ndarray, x1: np.ndarray) -> np.ndarray:
    """Constant velocity of the straight path: x1 - x0, independent of t."""
    a = _check_chunk(x0, "x0")
    b = _check_chunk(x1, "x1")
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch {a.shape} vs {b.shape}")
    return b - a


def euler_integrate(velocity_fn: Callable[[float, np.ndarray], np.ndarray],
                    x_init: np.ndarray, n_steps: int) -> np.ndarray:
    """Integrate dx/dt = v(t, x) from t=0 to t=1 with n_steps uniform steps.

    The field is evaluated exactly n_steps times, at t = i / n_steps for
    i = 0 .. n_steps - 1, so the call count equals the step count.
    """
    n = int(n_steps)
    if n < 1:
        raise ValueError(f"n_steps must be >= 1, got {n_steps}")
    x = np.array(x_init, dtype=np.float64, copy=True)
    dt = 1.0 / n
    for i in range(n):
        x = x + dt * np.asarray(velocity_fn(i * dt, x), dtype=np.float64)
    return x
