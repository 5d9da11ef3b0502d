"""Checkpoint files: an ordered list of float64 arrays, nothing else.

Layout (all integers little-endian uint32): magic ``GXCK``, array count,
then per array its rank, its dimensions, and the values as little-endian
float64, C order. The format carries no names or architecture description;
the reader must already know what each slot means, which keeps the file
layout independent of any particular model.
"""

from __future__ import annotations

import struct
from typing import List, Sequence

import numpy as np

from ..errors import ConfigError

CHECKPOINT_MAGIC = b"GXCK"


def save_checkpoint(path, arrays: Sequence[np.ndarray]) -> None:
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(struct.pack("<I", len(arrays)))
        for a in arrays:
            arr = np.ascontiguousarray(np.asarray(a, dtype=np.float64))
            fh.write(struct.pack("<I", arr.ndim))
            fh.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
            fh.write(arr.astype("<f8", copy=False).tobytes(order="C"))


def load_checkpoint(path) -> List[np.ndarray]:
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < 8 or blob[:4] != CHECKPOINT_MAGIC:
        raise ConfigError(f"{path}: not a checkpoint file")
    (count,) = struct.unpack_from("<I", blob, 4)
    offset = 8
    arrays: List[np.ndarray] = []
    for _ in range(count):
        if offset + 4 > len(blob):
            raise ConfigError(f"{path}: truncated checkpoint")
        (rank,) = struct.unpack_from("<I", blob, offset)
        offset += 4
        if offset + 4 * rank > len(blob):
            raise ConfigError(f"{path}: truncated checkpoint")
        shape = struct.unpack_from(f"<{rank}I", blob, offset)
        offset += 4 * rank
        n = int(np.prod(shape)) if rank else 1
        nbytes = 8 * n
        if offset + nbytes > len(blob):
            raise ConfigError(f"{path}: truncated checkpoint")
        values = np.frombuffer(blob, dtype="<f8", count=n, offset=offset).reshape(shape)
        arrays.append(values.astype(np.float64))
        offset += nbytes
    if offset != len(blob):
        raise ConfigError(f"{path}: {len(blob) - offset} trailing bytes after last array")
    return arrays
