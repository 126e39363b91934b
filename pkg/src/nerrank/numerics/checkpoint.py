"""Binary model checkpoints.

Layout: magic "NRKC", u32 format version, u32 parameter count, then per
parameter: u32 name length, UTF-8 name, u32 rank, u64 extents, raw
little-endian float64 values. An optional optimizer section follows (flag
byte): step counter, hyperparameters, and both moment accumulators in
parameter order. All integers little-endian.
"""

from __future__ import annotations

import struct

import numpy as np

from ..errors import CheckpointMismatchError
from .optim import AdamState, ParamStore

MAGIC = b"NRKC"
VERSION = 1


def _write_array(f, arr: np.ndarray):
    f.write(struct.pack("<I", arr.ndim))
    f.write(struct.pack(f"<{arr.ndim}Q", *arr.shape))
    f.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())


def _read_array(f) -> np.ndarray:
    (rank,) = struct.unpack("<I", _take(f, 4))
    shape = struct.unpack(f"<{rank}Q", _take(f, 8 * rank)) if rank else ()
    count = 1
    for d in shape:
        count *= d
    raw = _take(f, 8 * count)
    return np.frombuffer(raw, dtype="<f8").reshape(shape).astype(np.float64)


def _take(f, n: int) -> bytes:
    buf = f.read(n)
    if len(buf) != n:
        raise CheckpointMismatchError("checkpoint truncated")
    return buf


def save_checkpoint(path, store: ParamStore, adam: AdamState | None = None):
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<I", VERSION))
        f.write(struct.pack("<I", len(store)))
        for name, t in store.items():
            encoded = name.encode("utf-8")
            f.write(struct.pack("<I", len(encoded)))
            f.write(encoded)
            _write_array(f, t.data)
        if adam is None:
            f.write(struct.pack("<B", 0))
        else:
            f.write(struct.pack("<B", 1))
            f.write(struct.pack("<Q", adam.t))
            f.write(struct.pack("<4d", adam.lr, adam.beta1, adam.beta2, adam.eps))
            for m in adam.m:
                _write_array(f, m)
            for v in adam.v:
                _write_array(f, v)


def load_checkpoint(path, store: ParamStore, adam: AdamState | None = None) -> bool:
    """Restore parameters (and optimizer state when `adam` is given) from
    `path`. Names and shapes must match the store exactly. Returns True if
    the file carried optimizer state."""
    with open(path, "rb") as f:
        if _take(f, 4) != MAGIC:
            raise CheckpointMismatchError(f"{path}: not a checkpoint file")
        (version,) = struct.unpack("<I", _take(f, 4))
        if version != VERSION:
            raise CheckpointMismatchError(f"{path}: format version {version}, expected {VERSION}")
        (count,) = struct.unpack("<I", _take(f, 4))
        arrays = {}
        order = []
        for _ in range(count):
            (name_len,) = struct.unpack("<I", _take(f, 4))
            name = _take(f, name_len).decode("utf-8")
            arrays[name] = _read_array(f)
            order.append(name)
        store.load_arrays(arrays)
        (has_adam,) = struct.unpack("<B", _take(f, 1))
        if has_adam:
            (t,) = struct.unpack("<Q", _take(f, 8))
            lr, beta1, beta2, eps = struct.unpack("<4d", _take(f, 32))
            ms = [_read_array(f) for _ in range(count)]
            vs = [_read_array(f) for _ in range(count)]
            if adam is not None:
                adam.lr, adam.beta1, adam.beta2, adam.eps = lr, beta1, beta2, eps
                adam.load_state_arrays({"t": t, "m": ms, "v": vs})
        elif adam is not None:
            raise CheckpointMismatchError(f"{path}: no optimizer state in checkpoint")
        return bool(has_adam)
