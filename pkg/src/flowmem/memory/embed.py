"""Retrieval embedding head: projection plus unit normalization."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..nets import DenseBlockSpec, ParamStore, init_block, load_checkpoint, mlp_forward, save_checkpoint

UNIT_NORM_TOL = 1e-9


class DegenerateEmbeddingError(ValueError):
    """The head produced a zero vector that cannot be normalized."""


def mean_pool(tokens: np.ndarray) -> np.ndarray:
    """Arithmetic mean over a non-empty uniform-dim sequence of vectors."""
    arr = np.asarray(tokens, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[0] == 0:
        raise ValueError("tokens must form a non-empty (L, D) sequence")
    return arr.mean(axis=0)


def unit_normalize(vec: np.ndarray) -> np.ndarray:
    v = np.asarray(vec, dtype=np.float64)
    norm = float(np.linalg.norm(v))
    if norm < 1e-12:
        raise DegenerateEmbeddingError("embedding has zero norm before normalization")
    return v / norm


@dataclass
class PriorHead:
    """Two-layer projection from context vectors to unit-norm task embeddings."""

    spec: DenseBlockSpec
    params: ParamStore

    @classmethod
    def create(cls, ctx_dim: int, hidden: int, embed_dim: int,
               rng: np.random.Generator) -> "PriorHead":
        spec = DenseBlockSpec(kind="mlp", widths=(ctx_dim, hidden, embed_dim), activation="tanh")
        params = ParamStore()
        init_block(params, spec, rng, prefix="head.")
        return cls(spec=spec, params=params)

    @property
    def ctx_dim(self) -> int:
        return self.spec.in_dim

    @property
    def embed_dim(self) -> int:
        return self.spec.out_dim

    def save(self, path: str | Path, meta: dict | None = None) -> None:
        save_checkpoint(path, kind="prior-head", store=self.params,
                        specs={"head": self.spec}, meta=meta or {})

    @classmethod
    def load(cls, path: str | Path) -> "PriorHead":
        _, _, store, specs, _ = load_checkpoint(path, expected_kind="prior-head")
        return cls(spec=specs["head"], params=store)


def embed_context(head: PriorHead, context: np.ndarray) -> np.ndarray:
    """Project a context vector and normalize it onto the unit sphere."""
    ctx = np.asarray(context, dtype=np.float64)
    if ctx.shape != (head.ctx_dim,):
        raise ValueError(f"context shape {ctx.shape} does not match head input {head.ctx_dim}")
    return unit_normalize(mlp_forward(head.spec, head.params, ctx, prefix="head."))
