"""Temporal consistency residual.

The model watches the previously executed action chunk through one
self-attention block, folds the attended features into a gated recurrent
state that persists across chunks of an episode, and decodes a residual
bias with the same shape as a chunk. Adding that bias to the prior-sampled
initialization nudges the generative start toward a continuation that is
consistent with what was just executed.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping

import numpy as np

from ..nets import (
    DenseBlockSpec,
    GradientReport,
    ParamStore,
    Tensor,
    as_tensor,
    attention_apply,
    backward,
    gru_apply,
    init_block,
    load_checkpoint,
    save_checkpoint,
)


@dataclass
class ConsistencyModel:
    chunk_len: int
    action_dim: int
    feat_dim: int
    state_dim: int
    p_cold: float
    params: ParamStore
    attn_spec: DenseBlockSpec
    cell_spec: DenseBlockSpec
    call_count: int = field(default=0, compare=False)

    @classmethod
    def create(cls, chunk_len: int, action_dim: int, rng: np.random.Generator,
               feat_dim: int = 32, state_dim: int = 32, p_cold: float = 0.1
               ) -> "ConsistencyModel":
        params = ParamStore()
        attn_spec = DenseBlockSpec(kind="attention", widths=(feat_dim,))
        cell_spec = DenseBlockSpec(kind="recurrent-cell", widths=(feat_dim, state_dim))
        bound_e = 1.0 / np.sqrt(action_dim)
        params.add("embed.w", rng.uniform(-bound_e, bound_e, size=(action_dim, feat_dim)))
        params.add("embed.b", rng.uniform(-bound_e, bound_e, size=(feat_dim,)))
        init_block(params, attn_spec, rng, prefix="attn.")
        init_block(params, cell_spec, rng, prefix="cell.")
        bound_d = 1.0 / np.sqrt(state_dim)
        params.add("dec.w", rng.uniform(-bound_d, bound_d, size=(state_dim, chunk_len * action_dim)))
        params.add("dec.b", rng.uniform(-bound_d, bound_d, size=(chunk_len * action_dim,)))
        return cls(chunk_len=chunk_len, action_dim=action_dim, feat_dim=feat_dim,
                   state_dim=state_dim, p_cold=p_cold, params=params,
                   attn_spec=attn_spec, cell_spec=cell_spec)

    def initial_state(self) -> np.ndarray:
        return np.zeros(self.state_dim, dtype=np.float64)

    # ---- graph-level forward ------------------------------------------------------

    def _features_t(self, leaves: Mapping[str, Tensor], chunk: Tensor) -> Tensor:
        embedded = chunk @ leaves["embed.w"] + leaves["embed.b"].reshape(1, -1)
        attended, _ = attention_apply(leaves, embedded, prefix="attn.")
        return attended

    def _step_t(self, leaves: Mapping[str, Tensor], state: Tensor,
                features: Tensor) -> tuple[Tensor, Tensor]:
        pooled = features.mean(axis=0, keepdims=True)
        new_state = gru_apply(leaves, state, pooled, prefix="cell.")
        bias = new_state @ leaves["dec.w"] + leaves["dec.b"].reshape(1, -1)
        return new_state, bias.reshape(self.chunk_len, self.action_dim)

    # ---- persistence ---------------------------------------------------------------

    def save(self, path: str | Path) -> None:
        save_checkpoint(path, kind="consistency", store=self.params,
                        specs={"attn": self.attn_spec, "cell": self.cell_spec},
                        meta={"chunk_len": self.chunk_len, "action_dim": self.action_dim,
                              "feat_dim": self.feat_dim, "state_dim": self.state_dim,
                              "p_cold": self.p_cold})

    @classmethod
    def load(cls, path: str | Path) -> "ConsistencyModel":
        _, meta, store, specs, _ = load_checkpoint(path, expected_kind="consistency")
        return cls(chunk_len=int(meta["chunk_len"]), action_dim=int(meta["action_dim"]),
                   feat_dim=int(meta["feat_dim"]), state_dim=int(meta["state_dim"]),
                   p_cold=float(meta["p_cold"]), params=store,
                   attn_spec=specs["attn"], cell_spec=specs["cell"])


def consistency_forward(model: ConsistencyModel, prev_chunk: np.ndarray) -> np.ndarray:
    """Per-step features of the previous chunk after embedding and attention."""
    chunk = np.asarray(prev_chunk, dtype=np.float64)
    if chunk.shape != (model.chunk_len, model.action_dim):
        raise ValueError(f"chunk shape {chunk.shape} does not match model "
                         f"({model.chunk_len}, {model.action_dim})")
    model.call_count += 1
    return model._features_t(model.params.leaves(), as_tensor(chunk)).value


def lcm_step(model: ConsistencyModel, state: np.ndarray,
             features: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Pool features, advance the recurrent state, decode the bias."""
    s = np.asarray(state, dtype=np.float64).reshape(1, -1)
    if s.shape[1] != model.state_dim:
        raise ValueError(f"state dim {s.shape[1]} != model state dim {model.state_dim}")
    new_state, bias = model._step_t(model.params.leaves(), as_tensor(s),
                                    as_tensor(np.asarray(features, dtype=np.float64)))
    return new_state.value.reshape(-1), bias.value


def cold_start_bias(model: ConsistencyModel) -> np.ndarray:
    """Bias emitted at episode start: zero previous chunk, reset state."""
    zeros = np.zeros((model.chunk_len, model.action_dim))
    features = consistency_forward(model, zeros)
    _, bias = lcm_step(model, model.initial_state(), features)
    return bias


def residual_target(gt_chunk: np.ndarray, prior_mean: np.ndarray) -> np.ndarray:
    """Regression target: ground-truth chunk minus the prior mean."""
    a = np.asarray(gt_chunk, dtype=np.float64)
    b = np.asarray(prior_mean, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch {a.shape} vs {b.shape}")
    return a - b


def inject_bias(prior_sample: np.ndarray, bias: np.ndarray) -> np.ndarray:
    """Entrywise sum; the result is the flow policy's starting chunk."""
    a = np.asarray(prior_sample, dtype=np.float64)
    b = np.asarray(bias, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch {a.shape} vs {b.shape}")
    return a + b


def unrolled_loss_t(model: ConsistencyModel, leaves: Mapping[str, Tensor],
                    rollout: list[tuple[np.ndarray, np.ndarray]],
                    p_cold: float, rng: np.random.Generator | None) -> Tensor:
    """Recorded-graph MSE of the bias sequence against its targets.

    The recurrent state is carried across the rollout in episode order.
    With probability p_cold per step the previous chunk is zeroed before
    the forward pass, exposing the model to its episode-start regime.
    """
    if len(rollout) == 0:
        raise ValueError("rollout must contain at least one step")
    state = as_tensor(np.zeros((1, model.state_dim)))
    total: Tensor | None = None
    for prev_chunk, target in rollout:
        chunk = np.asarray(prev_chunk, dtype=np.float64)
        if p_cold > 0 and rng is not None and rng.random() < p_cold:
            chunk = np.zeros_like(chunk)
        features = model._features_t(leaves, as_tensor(chunk))
        state, bias = model._step_t(leaves, state, features)
        diff = bias - as_tensor(np.asarray(target, dtype=np.float64))
        term = (diff * diff).mean()
        total = term if total is None else total + term
    return total * (1.0 / len(rollout))


def lcm_loss(model: ConsistencyModel, rollout: list[tuple[np.ndarray, np.ndarray]],
             p_cold: float = 0.0, rng: np.random.Generator | None = None
             ) -> tuple[float, GradientReport]:
    """Unrolled MSE and analytic gradients for one episode rollout."""
    leaves = model.params.leaves()
    loss = unrolled_loss_t(model, leaves, rollout, p_cold, rng)
    return float(loss.value), backward(loss, leaves)
