"""Binary tensor file format used for images, feature dumps and checkpoints.

Layout: magic ``MSRT``, version byte 0x01, u8 rank, rank little-endian u32
dims, then row-major little-endian float32 payload. Round trips are
bit-exact for float32 data.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .errors import DataError

MAGIC = b"MSRT"
VERSION = 1
_MAX_RANK = 32


def save_tensor(path, t: np.ndarray) -> None:
    t = np.ascontiguousarray(t, dtype="<f4")
    if t.ndim < 1 or t.ndim > _MAX_RANK:
        raise DataError(f"tensor rank {t.ndim} outside supported range 1..{_MAX_RANK}")
    header = MAGIC + struct.pack("<BB", VERSION, t.ndim)
    header += struct.pack(f"<{t.ndim}I", *t.shape)
    Path(path).write_bytes(header + t.tobytes())


def load_tensor(path) -> np.ndarray:
    raw = Path(path).read_bytes()
    if len(raw) < 6:
        raise DataError(f"{path}: truncated header ({len(raw)} bytes)")
    if raw[:4] != MAGIC:
        raise DataError(f"{path}: bad magic {raw[:4]!r}, expected {MAGIC!r}")
    version, rank = struct.unpack_from("<BB", raw, 4)
    if version != VERSION:
        raise DataError(f"{path}: unsupported format version {version}")
    if rank < 1 or rank > _MAX_RANK:
        raise DataError(f"{path}: invalid rank {rank}")
    dims_end = 6 + 4 * rank
    if len(raw) < dims_end:
        raise DataError(f"{path}: truncated dimension list")
    shape = struct.unpack_from(f"<{rank}I", raw, 6)
    count = int(np.prod(shape, dtype=np.int64))
    expected = dims_end + 4 * count
    if len(raw) != expected:
        raise DataError(
            f"{path}: payload size mismatch, expected {expected} bytes for shape "
            f"{shape}, file has {len(raw)}"
        )
    data = np.frombuffer(raw, dtype="<f4", offset=dims_end, count=count)
    return data.reshape(shape).copy()
