"""Forward rules for the three dense block kinds.

The ``*_apply`` functions operate on graph tensors and are used both for
training (record then backprop) and inference (read ``.value`` off the
result). The module-level wrappers expose plain ndarray signatures.
"""

from __future__ import annotations

from typing import Mapping

import numpy as np

from .autodiff import Tensor, as_tensor, concat, softmax
from .params import DenseBlockSpec

_ACT = {
    "tanh": lambda t: t.tanh(),
    "relu": lambda t: t.relu(),
    "linear": lambda t: t,
}


def mlp_apply(spec: DenseBlockSpec, leaves: Mapping[str, Tensor], x: Tensor,
              prefix: str = "") -> Tensor:
    """Dense layers with the spec activation on hidden layers, linear output."""
    if spec.kind != "mlp":
        raise ValueError("mlp_apply requires an mlp spec")
    h = x
    n_layers = len(spec.widths) - 1
    act = _ACT[spec.activation]
    for i in range(n_layers):
        w = leaves[f"{prefix}w{i}"]
        b = leaves[f"{prefix}b{i}"]
        h = h @ w + b.reshape(1, -1)
        if i < n_layers - 1:
            h = act(h)
    return h


def attention_apply(leaves: Mapping[str, Tensor], tokens: Tensor,
                    prefix: str = "") -> tuple[Tensor, Tensor]:
    """Single-head self-attention over an (L, D) token matrix.

    Returns the attended outputs and the (L, L) softmax weight matrix so
    callers can audit the row-stochastic property.
    """
    q = tokens @ leaves[f"{prefix}wq"]
    k = tokens @ leaves[f"{prefix}wk"]
    v = tokens @ leaves[f"{prefix}wv"]
    d = tokens.shape[1]
    scores = (q @ k.T) * (1.0 / np.sqrt(d))
    weights = softmax(scores, axis=-1)
    return weights @ v, weights


def gru_apply(leaves: Mapping[str, Tensor], state: Tensor, x: Tensor,
              prefix: str = "") -> Tensor:
    """Gated recurrent update; state and input are (1, D) rows.

    h' = (1 - z) * n + z * h with reset gate r, update gate z and
    candidate n = tanh(Wn x + r * (Un h) + bn).
    """
    def gate(name: str) -> Tensor:
        return (x @ leaves[f"{prefix}w{name}"]
                + state @ leaves[f"{prefix}u{name}"]
                + leaves[f"{prefix}b{name}"].reshape(1, -1))

    r = gate("r").sigmoid()
    z = gate("z").sigmoid()
    n = (x @ leaves[f"{prefix}wn"]
         + r * (state @ leaves[f"{prefix}un"])
         + leaves[f"{prefix}bn"].reshape(1, -1)).tanh()
    return (1.0 - z) * n + z * state


# ---- ndarray-facing wrappers ----------------------------------------------------


def mlp_forward(spec: DenseBlockSpec, store, input_vec: np.ndarray,
                prefix: str = "") -> np.ndarray:
    """Evaluate an MLP on a single input vector."""
    x = np.asarray(input_vec, dtype=np.float64)
    if x.ndim != 1 or x.shape[0] != spec.in_dim:
        raise ValueError(f"input dim {x.shape} does not match spec in_dim {spec.in_dim}")
    out = mlp_apply(spec, store.leaves(), as_tensor(x.reshape(1, -1)), prefix)
    return out.value.reshape(-1)


def attention_forward(store, tokens: np.ndarray, prefix: str = "") -> np.ndarray:
    """Evaluate self-attention on a non-empty (L, D) token sequence."""
    toks = np.asarray(tokens, dtype=np.float64)
    if toks.ndim != 2 or toks.shape[0] == 0:
        raise ValueError("tokens must be a non-empty (L, D) sequence")
    out, _ = attention_apply(store.leaves(), as_tensor(toks), prefix)
    return out.value


def recurrent_step(store, state: np.ndarray, input_vec: np.ndarray,
                   prefix: str = "") -> tuple[np.ndarray, np.ndarray]:
    """One gated recurrent update; the output equals the new state."""
    h = np.asarray(state, dtype=np.float64).reshape(1, -1)
    x = np.asarray(input_vec, dtype=np.float64).reshape(1, -1)
    un = store.arrays[f"{prefix}un"]
    wn = store.arrays[f"{prefix}wn"]
    if h.shape[1] != un.shape[0]:
        raise ValueError(f"state dim {h.shape[1]} does not match cell dim {un.shape[0]}")
    if x.shape[1] != wn.shape[0]:
        raise ValueError(f"input dim {x.shape[1]} does not match cell dim {wn.shape[0]}")
    new_state = gru_apply(store.leaves(), as_tensor(h), as_tensor(x), prefix)
    flat = new_state.value.reshape(-1)
    return flat, flat.copy()


def reset_state(state_dim: int) -> np.ndarray:
    """The defined initial recurrent state: all zeros."""
    return np.zeros(state_dim, dtype=np.float64)
