"""Self-describing binary container with a trailing checksum.

Layout (all little-endian):

    magic    4 bytes  b"FMC1"
    hlen     u32      byte length of the JSON header
    header   hlen bytes of UTF-8 JSON:
                 {"kind": ..., "meta": {...},
                  "arrays": [{"name", "dtype", "shape"}, ...]}
    payload  raw C-order array bytes, in header order
    crc      u32      CRC-32 of every preceding byte

Array order is sorted by name, so identical contents always produce
identical bytes. The CRC rejects any single-byte corruption.
"""

from __future__ import annotations

import json
import struct
import zlib
from pathlib import Path

import numpy as np

MAGIC = b"FMC1"

_ALLOWED_DTYPES = {"float64", "int64", "uint8"}


class ContainerError(ValueError):
    pass


class ContainerCorruptError(ContainerError):
    """Checksum, magic or structural failure while reading a container."""


def write_container(path: str | Path, kind: str, meta: dict,
                    arrays: dict[str, np.ndarray]) -> None:
    records = []
    payload = bytearray()
    for name in sorted(arrays):
        arr = np.ascontiguousarray(arrays[name])
        if arr.dtype.name not in _ALLOWED_DTYPES:
            arr = np.ascontiguousarray(arr, dtype=np.float64)
        if arr.dtype.byteorder == ">":
            arr = arr.astype(arr.dtype.newbyteorder("<"))
        records.append({"name": name, "dtype": arr.dtype.name, "shape": list(arr.shape)})
        payload.extend(arr.tobytes())

    header = json.dumps(
        {"kind": kind, "meta": meta, "arrays": records},
        sort_keys=True, separators=(",", ":"),
    ).encode("utf-8")

    blob = bytearray()
    blob.extend(MAGIC)
    blob.extend(struct.pack("<I", len(header)))
    blob.extend(header)
    blob.extend(payload)
    blob.extend(struct.pack("<I", zlib.crc32(bytes(blob)) & 0xFFFFFFFF))
    Path(path).write_bytes(bytes(blob))


def read_container(path: str | Path) -> tuple[str, dict, dict[str, np.ndarray]]:
    raw = Path(path).read_bytes()
    if len(raw) < len(MAGIC) + 8:
        raise ContainerCorruptError(f"{path}: file truncated")
    if raw[:4] != MAGIC:
        raise ContainerCorruptError(f"{path}: bad magic {raw[:4]!r}")
    body, crc_bytes = raw[:-4], raw[-4:]
    (stored_crc,) = struct.unpack("<I", crc_bytes)
    if zlib.crc32(body) & 0xFFFFFFFF != stored_crc:
        raise ContainerCorruptError(f"{path}: checksum mismatch, file is corrupt")

    (hlen,) = struct.unpack("<I", body[4:8])
    header_end = 8 + hlen
    if header_end > len(body):
        raise ContainerCorruptError(f"{path}: header overruns file")
    header = json.loads(body[8:header_end].decode("utf-8"))

    arrays: dict[str, np.ndarray] = {}
    offset = header_end
    for record in header["arrays"]:
        dtype = np.dtype(record["dtype"])
        shape = tuple(record["shape"])
        count = int(np.prod(shape, dtype=np.int64))
        nbytes = dtype.itemsize * count
        chunk = body[offset:offset + nbytes]
        if len(chunk) != nbytes:
            raise ContainerCorruptError(f"{path}: payload truncated at {record['name']!r}")
        arrays[record["name"]] = np.frombuffer(chunk, dtype=dtype).reshape(shape).copy()
        offset += nbytes
    if offset != len(body):
        raise ContainerCorruptError(f"{path}: trailing bytes after payload")
    return header["kind"], header["meta"], arrays
