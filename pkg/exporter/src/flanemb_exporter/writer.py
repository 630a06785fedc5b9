"""FLANEMB1 writer: magic, u32 dim, u32 count, (u64 key, dim x f32) records.

Everything little-endian.  Files are written to a temp path and renamed into
place so a crashed export never leaves a truncated table behind.
"""

from __future__ import annotations

import os
import struct
from pathlib import Path

import numpy as np

MAGIC = b"FLANEMB1"


class WriteError(Exception):
    pass


def write_flanemb(path: str | Path, dim: int, records: dict[int, np.ndarray]) -> None:
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    try:
        with open(tmp, "wb") as fh:
            fh.write(MAGIC)
            fh.write(struct.pack("<II", dim, len(records)))
            for key in sorted(records):
                vec = np.asarray(records[key], dtype="<f4")
                if vec.shape != (dim,):
                    raise WriteError(f"key {key}: vector shape {vec.shape} != ({dim},)")
                fh.write(struct.pack("<Q", key))
                fh.write(vec.tobytes())
        os.replace(tmp, path)
    finally:
        if tmp.exists():
            tmp.unlink()
