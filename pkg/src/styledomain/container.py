"""Versioned binary container shared by checkpoint and direction files.

Layout: 8-byte magic, u32 version, u32 header length, UTF-8 JSON header
(human-readable: includes a tensor index of name/dtype/shape), raw
little-endian tensor payload, and a trailing SHA-256 over everything
before it.  Bit-exact round trips: tensors are written in their native
dtype and restored to it.
"""
from __future__ import annotations

import hashlib
import json
import struct
from pathlib import Path

import numpy as np
import torch

from .errors import SerializationError

VERSION = 1

_DTYPES = {
    "float32": (np.dtype("<f4"), torch.float32),
    "float64": (np.dtype("<f8"), torch.float64),
}


def _dtype_name(t: torch.Tensor) -> str:
    for name, (_, td) in _DTYPES.items():
        if t.dtype == td:
            return name
    raise SerializationError(f"unsupported dtype {t.dtype}")


def write_container(
    path: str | Path, magic: bytes, header: dict, tensors: dict[str, torch.Tensor]
) -> None:
    if len(magic) != 8:
        raise SerializationError("magic must be 8 bytes")
    index = []
    blobs = []
    for name in sorted(tensors):
        t = tensors[name].detach().contiguous()
        dt = _dtype_name(t)
        raw = t.numpy().astype(_DTYPES[dt][0], copy=False).tobytes()
        index.append({"name": name, "dtype": dt, "shape": list(t.shape), "nbytes": len(raw)})
        blobs.append(raw)
    full_header = dict(header)
    full_header["tensors"] = index
    header_bytes = json.dumps(full_header, sort_keys=True, indent=1).encode()

    body = magic + struct.pack("<II", VERSION, len(header_bytes)) + header_bytes
    body += b"".join(blobs)
    checksum = hashlib.sha256(body).digest()
    Path(path).write_bytes(body + checksum)


def read_container(
    path: str | Path, magic: bytes
) -> tuple[dict, dict[str, torch.Tensor]]:
    raw = Path(path).read_bytes()
    if len(raw) < 8 + 8 + 32:
        raise SerializationError(f"{path}: truncated container")
    body, checksum = raw[:-32], raw[-32:]
    if hashlib.sha256(body).digest() != checksum:
        raise SerializationError(f"{path}: checksum mismatch (truncated or corrupted file)")
    if body[:8] != magic:
        raise SerializationError(f"{path}: wrong magic {body[:8]!r}")
    version, header_len = struct.unpack("<II", body[8:16])
    if version != VERSION:
        raise SerializationError(f"{path}: unsupported container version {version}")
    header = json.loads(body[16 : 16 + header_len].decode())
    tensors: dict[str, torch.Tensor] = {}
    offset = 16 + header_len
    for entry in header.pop("tensors"):
        np_dt, torch_dt = _DTYPES[entry["dtype"]]
        nbytes = entry["nbytes"]
        chunk = body[offset : offset + nbytes]
        if len(chunk) != nbytes:
            raise SerializationError(f"{path}: tensor payload truncated")
        arr = np.frombuffer(chunk, dtype=np_dt).reshape(entry["shape"]).copy()
        tensors[entry["name"]] = torch.from_numpy(arr).to(torch_dt)
        offset += nbytes
    if offset != len(body):
        raise SerializationError(f"{path}: trailing bytes after tensor payload")
    return header, tensors
