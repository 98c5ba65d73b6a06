"""Decoupled-weight-decay adaptive optimizer."""

from __future__ import annotations

import numpy as np

from .autodiff import GradientReport
from .params import ParamStore


class OptimizerError(ValueError):
    pass


def adamw_step(store: ParamStore, report: GradientReport, lr: float,
               weight_decay: float, beta1: float = 0.9, beta2: float = 0.999,
               eps: float = 1e-8) -> ParamStore:
    """Apply one bias-corrected adaptive step with decoupled weight decay.

    Updates the store in place (moments and step counter included) and
    returns it. A non-finite gradient rejects the whole step.
    """
    for name, g in report.grads.items():
        if name not in store.arrays:
            raise OptimizerError(f"gradient for unknown parameter {name!r}")
        if g.shape != store.arrays[name].shape:
            raise OptimizerError(f"gradient shape mismatch for {name!r}")
        if not np.all(np.isfinite(g)):
            raise OptimizerError(f"non-finite gradient for {name!r}; step rejected")

    store.step += 1
    t = store.step
    bc1 = 1.0 - beta1**t
    bc2 = 1.0 - beta2**t
    for name, g in report.grads.items():
        p = store.arrays[name]
        m = store.m[name]
        v = store.v[name]
        m *= beta1
        m += (1.0 - beta1) * g
        v *= beta2
        v += (1.0 - beta2) * g * g
        m_hat = m / bc1
        v_hat = v / bc2
        p -= lr * (m_hat / (np.sqrt(v_hat) + eps) + weight_decay * p)
    return store
