"""Binary parameter files.

Layout: magic ``HBNP``, u32 version, length-prefixed model-kind tag,
u32 tensor count, then per tensor: u16 name length + utf8 name, u8 rank,
u32 dims, raw little-endian float64 payload. A sha256 digest of everything
before it closes the file; loads verify it before touching any data.
"""

from __future__ import annotations

import hashlib
import struct

import numpy as np

MAGIC = b"HBNP"
VERSION = 1

__all__ = ["ArtifactError", "save_params", "load_params"]


class ArtifactError(RuntimeError):
    """Corrupt, truncated, or wrong-version artifact file."""


def save_params(path, kind: str, tensors: dict[str, np.ndarray]) -> None:
    parts = [MAGIC, struct.pack("<I", VERSION)]
    kb = kind.encode("utf-8")
    parts.append(struct.pack("<H", len(kb)))
    parts.append(kb)
    parts.append(struct.pack("<I", len(tensors)))
    for name, arr in tensors.items():
        a = np.ascontiguousarray(arr, dtype=np.float64)
        nb = name.encode("utf-8")
        parts.append(struct.pack("<H", len(nb)))
        parts.append(nb)
        parts.append(struct.pack("<B", a.ndim))
        for d in a.shape:
            parts.append(struct.pack("<I", d))
        parts.append(a.astype("<f8").tobytes())
    body = b"".join(parts)
    with open(path, "wb") as fh:
        fh.write(body)
        fh.write(hashlib.sha256(body).digest())


def load_params(path, expect_kind: str | None = None) -> tuple[str, dict[str, np.ndarray]]:
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < 32 + len(MAGIC) + 4:
        raise ArtifactError(f"{path}: truncated file")
    body, digest = blob[:-32], blob[-32:]
    if hashlib.sha256(body).digest() != digest:
        raise ArtifactError(f"{path}: checksum mismatch")
    off = 0

    def take(n):
        nonlocal off
        if off + n > len(body):
            raise ArtifactError(f"{path}: truncated record")
        chunk = body[off:off + n]
        off += n
        return chunk

    if take(4) != MAGIC:
        raise ArtifactError(f"{path}: bad magic")
    (version,) = struct.unpack("<I", take(4))
    if version != VERSION:
        raise ArtifactError(f"{path}: unsupported version {version}")
    (klen,) = struct.unpack("<H", take(2))
    kind = take(klen).decode("utf-8")
    if expect_kind is not None and kind != expect_kind:
        raise ArtifactError(f"{path}: model kind {kind!r}, expected {expect_kind!r}")
    (count,) = struct.unpack("<I", take(4))
    tensors: dict[str, np.ndarray] = {}
    for _ in range(count):
        (nlen,) = struct.unpack("<H", take(2))
        name = take(nlen).decode("utf-8")
        (rank,) = struct.unpack("<B", take(1))
        dims = tuple(struct.unpack("<I", take(4))[0] for _ in range(rank))
        size = int(np.prod(dims)) if dims else 1
        payload = take(8 * size)
        tensors[name] = np.frombuffer(payload, dtype="<f8").reshape(dims).copy()
    if off != len(body):
        raise ArtifactError(f"{path}: trailing bytes")
    return kind, tensors
