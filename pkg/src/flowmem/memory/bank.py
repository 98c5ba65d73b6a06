"""Key-value trajectory memory with exact cosine retrieval.

Entries pair a unit-norm task embedding (the key) with a stored full
trajectory and its chunking metadata. Retrieval is an exhaustive scan:
keys are unit vectors, so the inner product with a unit query is the
cosine similarity, and exactness is free at desk-scale bank sizes.

File format, all little-endian:

    magic   b"FMBK"
    u16     format version (1)
    u32     D_z   key dimensionality
    u32     A     action dimensionality
    u32     H0    window length used for chunk extraction
    u32     Delta sliding-window stride
    u64     entry count
    entries D_z float64 key, u32 T, u16 task-id byte length,
            task-id UTF-8 bytes, T*A float64 trajectory rows
    u32     CRC-32 of every preceding byte

The bank is immutable once built; concurrent read-only retrieval is safe.
"""

from __future__ import annotations

import struct
import zlib
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .embed import UNIT_NORM_TOL

BANK_MAGIC = b"FMBK"
BANK_VERSION = 1


class BankFormatError(ValueError):
    pass


class BankCorruptError(BankFormatError):
    pass


@dataclass(frozen=True)
class MemoryEntry:
    key: np.ndarray          # (D_z,), unit L2 norm
    trajectory: np.ndarray   # (T, A)
    window_len: int          # H0
    stride: int              # Delta
    task_id: str

    def __post_init__(self):
        key = np.asarray(self.key, dtype=np.float64)
        traj = np.asarray(self.trajectory, dtype=np.float64)
        object.__setattr__(self, "key", key)
        object.__setattr__(self, "trajectory", traj)
        if key.ndim != 1:
            raise ValueError("key must be a vector")
        if abs(float(np.linalg.norm(key)) - 1.0) > UNIT_NORM_TOL:
            raise ValueError("key must be unit-norm within 1e-9")
        if traj.ndim != 2:
            raise ValueError("trajectory must be (T, A)")
        if not np.all(np.isfinite(traj)):
            raise ValueError("trajectory contains non-finite entries")
        if self.window_len < 1 or self.stride < 1:
            raise ValueError("window_len and stride must be >= 1")
        if traj.shape[0] < self.window_len:
            raise ValueError(
                f"trajectory length {traj.shape[0]} shorter than window {self.window_len}"
            )

    @property
    def length(self) -> int:
        return int(self.trajectory.shape[0])

    @property
    def n_windows(self) -> int:
        return (self.length - self.window_len) // self.stride + 1


class MemoryBank:
    def __init__(self, key_dim: int, action_dim: int, window_len: int, stride: int):
        self.key_dim = int(key_dim)
        self.action_dim = int(action_dim)
        self.window_len = int(window_len)
        self.stride = int(stride)
        self.entries: list[MemoryEntry] = []
        self._keys = np.zeros((0, self.key_dim))
        self.retrieval_count = 0

    def __len__(self) -> int:
        return len(self.entries)

    def insert(self, entry: MemoryEntry) -> None:
        if entry.key.shape != (self.key_dim,):
            raise ValueError(f"key dim {entry.key.shape} != bank key dim {self.key_dim}")
        if entry.trajectory.shape[1] != self.action_dim:
            raise ValueError("trajectory action dim does not match bank")
        if entry.window_len != self.window_len or entry.stride != self.stride:
            raise ValueError("entry chunking metadata does not match bank header")
        self.entries.append(entry)
        self._keys = np.vstack([self._keys, entry.key.reshape(1, -1)])

    def retrieve_topk(self, query: np.ndarray, k: int) -> list[tuple[MemoryEntry, float]]:
        """The k entries maximizing cosine similarity, sorted descending.

        Ties break by insertion order, earlier entries first.
        """
        q = np.asarray(query, dtype=np.float64)
        if q.shape != (self.key_dim,):
            raise ValueError(f"query dim {q.shape} != bank key dim {self.key_dim}")
        if len(self.entries) == 0:
            raise ValueError("bank is empty")
        if not 1 <= k <= len(self.entries):
            raise ValueError(f"k must be in [1, {len(self.entries)}], got {k}")
        self.retrieval_count += 1
        scores = self._keys @ q
        order = np.argsort(-scores, kind="stable")[:k]
        return [(self.entries[i], float(scores[i])) for i in order]

    # ---- persistence ------------------------------------------------------------

    def save(self, path: str | Path) -> None:
        blob = bytearray()
        blob.extend(BANK_MAGIC)
        blob.extend(struct.pack("<HIIIIQ", BANK_VERSION, self.key_dim, self.action_dim,
                                self.window_len, self.stride, len(self.entries)))
        for entry in self.entries:
            blob.extend(entry.key.astype("<f8").tobytes())
            task_bytes = entry.task_id.encode("utf-8")
            blob.extend(struct.pack("<IH", entry.length, len(task_bytes)))
            blob.extend(task_bytes)
            blob.extend(np.ascontiguousarray(entry.trajectory, dtype="<f8").tobytes())
        blob.extend(struct.pack("<I", zlib.crc32(bytes(blob)) & 0xFFFFFFFF))
        Path(path).write_bytes(bytes(blob))

    @classmethod
    def load(cls, path: str | Path) -> "MemoryBank":
        raw = Path(path).read_bytes()
        header_size = len(BANK_MAGIC) + struct.calcsize("<HIIIIQ")
        if len(raw) < header_size + 4:
            raise BankCorruptError(f"{path}: file truncated")
        if raw[:4] != BANK_MAGIC:
            raise BankFormatError(f"{path}: bad magic {raw[:4]!r}")
        body, crc_bytes = raw[:-4], raw[-4:]
        (stored_crc,) = struct.unpack("<I", crc_bytes)
        if zlib.crc32(body) & 0xFFFFFFFF != stored_crc:
            raise BankCorruptError(f"{path}: checksum mismatch, bank file is corrupt")

        version, key_dim, action_dim, window_len, stride, count = struct.unpack(
            "<HIIIIQ", body[4:header_size])
        if version != BANK_VERSION:
            raise BankFormatError(f"{path}: unsupported bank version {version}")
        bank = cls(key_dim, action_dim, window_len, stride)
        offset = header_size
        for _ in range(count):
            key = np.frombuffer(body, dtype="<f8", count=key_dim, offset=offset).copy()
            offset += key_dim * 8
            length, id_len = struct.unpack_from("<IH", body, offset)
            offset += struct.calcsize("<IH")
            task_id = body[offset:offset + id_len].decode("utf-8")
            offset += id_len
            traj = np.frombuffer(body, dtype="<f8", count=length * action_dim,
                                 offset=offset).reshape(length, action_dim).copy()
            offset += length * action_dim * 8
            bank.insert(MemoryEntry(key=key, trajectory=traj, window_len=window_len,
                                    stride=stride, task_id=task_id))
        if offset != len(body):
            raise BankCorruptError(f"{path}: trailing bytes after final entry")
        return bank
