"""
Embedding container shared by lexicons, context tokens and cluster centroids.

Layout (all integers little-endian u32)::

    magic      16 bytes  b"OAK-EMBEDDING\\x00\\x00\\x01"
    rows, d, flags
    body       rows * d little-endian float32, row-major
    [names]    if flags & 1: count, then (length, utf-8 bytes) per name
    [context]  if flags & 2: length, utf-8 bytes
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence, Tuple, Union

import numpy as np

from .exceptions import CheckpointError

MAGIC = b"OAK-EMBEDDING\x00\x00\x01"
FLAG_NAMES = 1
FLAG_CONTEXT = 2

_HEADER = struct.Struct("<III")
_U32 = struct.Struct("<I")


@dataclass(frozen=True)
class EmbeddingFile:
    """Decoded container contents."""

    matrix: np.ndarray
    names: Optional[Tuple[str, ...]] = None
    context_id: Optional[str] = None


def _pack_text(text: str) -> bytes:
    raw = text.encode("utf-8")
    return _U32.pack(len(raw)) + raw


def encode_matrix(
    matrix: np.ndarray,
    names: Optional[Sequence[str]] = None,
    context_id: Optional[str] = None,
) -> bytes:
    values = np.asarray(matrix, dtype="<f4")
    if values.ndim != 2:
        raise ValueError(f"expected a 2-D matrix, got shape {values.shape}")
    rows, d = values.shape
    if names is not None and len(names) != rows:
        raise ValueError(f"{len(names)} names for {rows} rows")

    flags = (FLAG_NAMES if names is not None else 0) | (FLAG_CONTEXT if context_id is not None else 0)
    chunks = [MAGIC, _HEADER.pack(rows, d, flags), np.ascontiguousarray(values).tobytes()]
    if names is not None:
        chunks.append(_U32.pack(len(names)))
        chunks.extend(_pack_text(name) for name in names)
    if context_id is not None:
        chunks.append(_pack_text(context_id))
    return b"".join(chunks)


class _Reader:
    def __init__(self, blob: bytes, source: str):
        self.blob = blob
        self.offset = 0
        self.source = source

    def take(self, size: int) -> bytes:
        end = self.offset + size
        if end > len(self.blob):
            raise CheckpointError(f"{self.source}: truncated container")
        chunk = self.blob[self.offset : end]
        self.offset = end
        return chunk

    def u32(self) -> int:
        return _U32.unpack(self.take(_U32.size))[0]

    def text(self) -> str:
        return self.take(self.u32()).decode("utf-8")


def decode_matrix(blob: bytes, source: str = "<bytes>") -> EmbeddingFile:
    reader = _Reader(blob, source)
    if reader.take(len(MAGIC)) != MAGIC:
        raise CheckpointError(f"{source}: not an embedding container")
    rows, d, flags = _HEADER.unpack(reader.take(_HEADER.size))
    body = reader.take(rows * d * 4)
    matrix = np.frombuffer(body, dtype="<f4").astype(np.float32).reshape(rows, d)

    names = None
    if flags & FLAG_NAMES:
        count = reader.u32()
        if count != rows:
            raise CheckpointError(f"{source}: name table has {count} entries for {rows} rows")
        names = tuple(reader.text() for _ in range(count))
    context_id = reader.text() if flags & FLAG_CONTEXT else None
    if reader.offset != len(blob):
        raise CheckpointError(f"{source}: trailing bytes after container")
    return EmbeddingFile(matrix=matrix, names=names, context_id=context_id)


def write_matrix(
    path: Union[str, Path],
    matrix: np.ndarray,
    names: Optional[Sequence[str]] = None,
    context_id: Optional[str] = None,
) -> Path:
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    target.write_bytes(encode_matrix(matrix, names, context_id))
    return target


def read_matrix(path: Union[str, Path]) -> EmbeddingFile:
    source = Path(path)
    try:
        blob = source.read_bytes()
    except OSError as exc:
        raise CheckpointError(f"cannot read {source}: {exc}") from exc
    return decode_matrix(blob, str(source))


__all__ = ["MAGIC", "EmbeddingFile", "encode_matrix", "decode_matrix", "write_matrix", "read_matrix"]
