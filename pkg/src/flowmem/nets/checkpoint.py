"""Checkpoint serialization for parameter stores.

A checkpoint holds the block specs, every named parameter array, both
optimizer moment accumulators and the step counter, plus caller metadata
and optional extra arrays (normalization constants and the like).
Round-trips are bit-exact.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from ..container import read_container, write_container
from .params import DenseBlockSpec, ParamStore


def save_checkpoint(path: str | Path, kind: str, store: ParamStore,
                    specs: dict[str, DenseBlockSpec], meta: dict,
                    extras: dict[str, np.ndarray] | None = None) -> None:
    arrays: dict[str, np.ndarray] = {}
    for name, arr in store.arrays.items():
        arrays[f"p/{name}"] = arr
        arrays[f"m/{name}"] = store.m[name]
        arrays[f"v/{name}"] = store.v[name]
    for name, arr in (extras or {}).items():
        arrays[f"x/{name}"] = arr
    full_meta = {
        "step": store.step,
        "specs": {k: s.to_dict() for k, s in specs.items()},
        "meta": meta,
    }
    write_container(path, kind, full_meta, arrays)


def load_checkpoint(path: str | Path, expected_kind: str | None = None):
    """Returns (kind, meta, store, specs, extras)."""
    kind, full_meta, arrays = read_container(path)
    if expected_kind is not None and kind != expected_kind:
        raise ValueError(f"{path}: checkpoint kind {kind!r}, expected {expected_kind!r}")
    store = ParamStore()
    extras: dict[str, np.ndarray] = {}
    for name, arr in arrays.items():
        tag, base = name.split("/", 1)
        if tag == "p":
            store.arrays[base] = arr
        elif tag == "m":
            store.m[base] = arr
        elif tag == "v":
            store.v[base] = arr
        elif tag == "x":
            extras[base] = arr
    store.step = int(full_meta["step"])
    specs = {k: DenseBlockSpec.from_dict(d) for k, d in full_meta["specs"].items()}
    return kind, full_meta["meta"], store, specs, extras
