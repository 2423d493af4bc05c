"""Versioned binary checkpoint container.

Layout (all integers little-endian)::

    magic      8 bytes   b"MSELCKPT"
    version    uint32
    meta       uint32 byte length + UTF-8 JSON (sorted keys)
    n_arrays   uint32
    per array: uint16 name length, UTF-8 name, uint8 ndim, uint32 dims...,
               uint64 byte length, float32 data
    crc32      uint32 over every preceding byte
"""

from __future__ import annotations

import json
import struct
import zlib
from dataclasses import dataclass, field

import numpy as np

MAGIC = b"MSELCKPT"
FORMAT_VERSION = 1


class CheckpointError(Exception):
    pass


class CheckpointFormatError(CheckpointError):
    """File is truncated, corrupt or not a checkpoint."""


class CheckpointVersionError(CheckpointError):
    """File was written by an incompatible format version."""


@dataclass
class Checkpoint:
    meta: dict
    arrays: dict = field(default_factory=dict)
    version: int = FORMAT_VERSION


def dumps(ckpt: Checkpoint) -> bytes:
    meta = json.dumps(ckpt.meta, sort_keys=True, separators=(",", ":")).encode("utf-8")
    parts = [MAGIC, struct.pack("<I", ckpt.version), struct.pack("<I", len(meta)), meta,
             struct.pack("<I", len(ckpt.arrays))]
    for name in sorted(ckpt.arrays):
        arr = np.asarray(ckpt.arrays[name], dtype="<f4", order="C")
        raw_name = name.encode("utf-8")
        data = arr.tobytes()
        parts += [struct.pack("<H", len(raw_name)), raw_name, struct.pack("<B", arr.ndim),
                  struct.pack(f"<{arr.ndim}I", *arr.shape), struct.pack("<Q", len(data)), data]
    body = b"".join(parts)
    return body + struct.pack("<I", zlib.crc32(body))


class _Reader:
    def __init__(self, buf):
        self.buf, self.pos = buf, 0

    def take(self, n):
        if self.pos + n > len(self.buf):
            raise CheckpointFormatError("checkpoint is truncated")
        out = self.buf[self.pos:self.pos + n]
        self.pos += n
        return out

    def unpack(self, fmt):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))


def loads(buf: bytes) -> Checkpoint:
    r = _Reader(buf)
    if r.take(len(MAGIC)) != MAGIC:
        raise CheckpointFormatError("not a motionsel checkpoint (bad magic)")
    (version,) = r.unpack("<I")
    if version != FORMAT_VERSION:
        raise CheckpointVersionError(
            f"checkpoint format version {version} is not supported (expected {FORMAT_VERSION})")
    if len(buf) < 4 or zlib.crc32(buf[:-4]) != struct.unpack("<I", buf[-4:])[0]:
        raise CheckpointFormatError("checkpoint is truncated or corrupt (checksum mismatch)")
    (meta_len,) = r.unpack("<I")
    try:
        meta = json.loads(r.take(meta_len).decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CheckpointFormatError(f"unreadable metadata block: {exc}") from None
    (count,) = r.unpack("<I")
    arrays = {}
    for _ in range(count):
        (name_len,) = r.unpack("<H")
        name = r.take(name_len).decode("utf-8")
        (ndim,) = r.unpack("<B")
        shape = r.unpack(f"<{ndim}I")
        (nbytes,) = r.unpack("<Q")
        if nbytes != 4 * int(np.prod(shape, dtype=np.int64)):
            raise CheckpointFormatError(f"array {name!r}: byte length does not match shape {shape}")
        arrays[name] = np.frombuffer(r.take(nbytes), dtype="<f4").reshape(shape).astype(np.float32)
    if r.pos != len(buf) - 4:
        raise CheckpointFormatError("trailing bytes after array section")
    return Checkpoint(meta, arrays, version)


def save_checkpoint(path, ckpt: Checkpoint):
    with open(path, "wb") as fh:
        fh.write(dumps(ckpt))


def load_checkpoint(path) -> Checkpoint:
    with open(path, "rb") as fh:
        return loads(fh.read())
