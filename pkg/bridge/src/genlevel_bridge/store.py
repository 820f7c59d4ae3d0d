"""Writer for the PIEM embedding store format.

Layout (little-endian): magic "PIEM", u32 version = 1, u32 dim, u64 count,
then per record: u32 key_len, UTF-8 key bytes, dim * f32.
"""

from __future__ import annotations

import struct
from pathlib import Path
from typing import Mapping

import numpy as np

PIEM_MAGIC = b"PIEM"
PIEM_VERSION = 1


def write_store(path: str | Path, dim: int, vectors: Mapping[str, np.ndarray]) -> None:
    with open(path, "wb") as fh:
        fh.write(PIEM_MAGIC)
        fh.write(struct.pack("<IIQ", PIEM_VERSION, dim, len(vectors)))
        for key, vec in vectors.items():
            arr = np.asarray(vec, dtype="<f4")
            if arr.shape != (dim,):
                raise ValueError(
                    f"vector for key {key!r} has shape {arr.shape}, expected ({dim},)"
                )
            key_bytes = key.encode("utf-8")
            fh.write(struct.pack("<I", len(key_bytes)))
            fh.write(key_bytes)
            fh.write(arr.tobytes())
