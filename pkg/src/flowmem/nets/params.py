"""Parameter storage and block specifications for the dense substrate."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .autodiff import Tensor

BLOCK_KINDS = ("mlp", "attention", "recurrent-cell")
ACTIVATIONS = ("tanh", "relu", "linear")


@dataclass(frozen=True)
class DenseBlockSpec:
    """Shape declaration for one differentiable block.

    widths semantics per kind:
      mlp             full layer widths, input first, output last
      attention       (token_dim,) with square Q/K/V projections
      recurrent-cell  (input_dim, state_dim)
    """

    kind: str
    widths: tuple[int, ...]
    activation: str = "tanh"

    def __post_init__(self):
        if self.kind not in BLOCK_KINDS:
            raise ValueError(f"unknown block kind {self.kind!r}")
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")
        widths = tuple(int(w) for w in self.widths)
        object.__setattr__(self, "widths", widths)
        if any(w <= 0 for w in widths):
            raise ValueError(f"widths must be positive, got {widths}")
        expected = {"mlp": (2, None), "attention": (1, 1), "recurrent-cell": (2, 2)}
        lo, hi = expected[self.kind]
        if len(widths) < lo or (hi is not None and len(widths) > hi):
            raise ValueError(f"{self.kind} expects widths of length >= {lo}, got {widths}")

    @property
    def in_dim(self) -> int:
        return self.widths[0]

    @property
    def out_dim(self) -> int:
        if self.kind == "mlp":
            return self.widths[-1]
        if self.kind == "attention":
            return self.widths[0]
        return self.widths[1]

    def to_dict(self) -> dict:
        return {"kind": self.kind, "widths": list(self.widths), "activation": self.activation}

    @classmethod
    def from_dict(cls, d: dict) -> "DenseBlockSpec":
        return cls(kind=d["kind"], widths=tuple(d["widths"]), activation=d["activation"])


class ParamStore:
    """Named float64 parameter arrays plus optimizer moment accumulators.

    Every array has exactly one owner: inserting a duplicate name is an
    error. Moments are created alongside each parameter and always match
    its shape. The step counter belongs to the decoupled-weight-decay
    optimizer and starts at zero.
    """

    def __init__(self):
        self.arrays: dict[str, np.ndarray] = {}
        self.m: dict[str, np.ndarray] = {}
        self.v: dict[str, np.ndarray] = {}
        self.step: int = 0

    def add(self, name: str, value: np.ndarray) -> None:
        if name in self.arrays:
            raise ValueError(f"parameter {name!r} already owned")
        arr = np.array(value, dtype=np.float64, copy=True)
        self.arrays[name] = arr
        self.m[name] = np.zeros_like(arr)
        self.v[name] = np.zeros_like(arr)

    def names(self) -> list[str]:
        return list(self.arrays.keys())

    def leaves(self) -> dict[str, Tensor]:
        """Fresh graph leaves for one recorded forward pass."""
        return {name: Tensor(arr) for name, arr in self.arrays.items()}

    def clone(self) -> "ParamStore":
        out = ParamStore()
        for name, arr in self.arrays.items():
            out.arrays[name] = arr.copy()
            out.m[name] = self.m[name].copy()
            out.v[name] = self.v[name].copy()
        out.step = self.step
        return out

    def allclose(self, other: "ParamStore", atol: float = 0.0) -> bool:
        if set(self.arrays) != set(other.arrays) or self.step != other.step:
            return False
        return all(
            np.allclose(self.arrays[k], other.arrays[k], rtol=0.0, atol=atol)
            for k in self.arrays
        )

    def __contains__(self, name: str) -> bool:
        return name in self.arrays


def _uniform(rng: np.random.Generator, shape: tuple[int, ...], fan_in: int) -> np.ndarray:
    bound = 1.0 / np.sqrt(fan_in)
    return rng.uniform(-bound, bound, size=shape)


def init_block(store: ParamStore, spec: DenseBlockSpec, rng: np.random.Generator,
               prefix: str = "") -> None:
    """Seeded uniform init in [-1/sqrt(fan_in), +1/sqrt(fan_in)] per array."""
    if spec.kind == "mlp":
        for i, (nin, nout) in enumerate(zip(spec.widths[:-1], spec.widths[1:])):
            store.add(f"{prefix}w{i}", _uniform(rng, (nin, nout), nin))
            store.add(f"{prefix}b{i}", _uniform(rng, (nout,), nin))
    elif spec.kind == "attention":
        d = spec.widths[0]
        for name in ("wq", "wk", "wv"):
            store.add(f"{prefix}{name}", _uniform(rng, (d, d), d))
    else:  # recurrent-cell
        din, ds = spec.widths
        for gate in ("r", "z", "n"):
            store.add(f"{prefix}w{gate}", _uniform(rng, (din, ds), din))
            store.add(f"{prefix}u{gate}", _uniform(rng, (ds, ds), ds))
            store.add(f"{prefix}b{gate}", _uniform(rng, (ds,), ds))


@dataclass(frozen=True)
class BlockLayout:
    """Convenience pairing of a spec with its name prefix inside a store."""

    spec: DenseBlockSpec
    prefix: str = ""
