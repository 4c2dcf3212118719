"""Binary checkpoint: magic "MSBL1" followed by named float64 blocks, little-endian.

Block layout: uint32 name length, UTF-8 name, uint32 rank, rank x uint64
dims, then prod(dims) float64 values in C order.
"""
from __future__ import annotations

import struct

import numpy as np

MAGIC = b"MSBL1"


class CheckpointError(ValueError):
    pass


def save_checkpoint(path, blocks: dict) -> None:
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        for name, arr in blocks.items():
            # asarray, not ascontiguousarray: the latter turns rank 0 into rank 1
            arr = np.asarray(arr, dtype="<f8")
            raw = name.encode("utf-8")
            fh.write(struct.pack("<I", len(raw)))
            fh.write(raw)
            fh.write(struct.pack("<I", arr.ndim))
            for d in arr.shape:
                fh.write(struct.pack("<Q", d))
            fh.write(arr.tobytes(order="C"))


def load_checkpoint(path) -> dict:
    with open(path, "rb") as fh:
        data = fh.read()
    if data[:len(MAGIC)] != MAGIC:
        raise CheckpointError(f"{path}: not a checkpoint (bad magic)")
    pos = len(MAGIC)
    blocks = {}
    try:
        while pos < len(data):
            (n,) = struct.unpack_from("<I", data, pos)
            pos += 4
            name = data[pos:pos + n].decode("utf-8")
            pos += n
            (rank,) = struct.unpack_from("<I", data, pos)
            pos += 4
            dims = struct.unpack_from(f"<{rank}Q", data, pos)
            pos += 8 * rank
            count = int(np.prod(dims)) if rank else 1
            if pos + 8 * count > len(data):
                raise CheckpointError(f"{path}: truncated block {name!r}")
            arr = np.frombuffer(data, dtype="<f8", count=count, offset=pos).reshape(dims)
            pos += 8 * count
            blocks[name] = arr.astype(np.float64)
    except struct.error as exc:
        raise CheckpointError(f"{path}: truncated checkpoint") from exc
    return blocks


def save_model(path, params: dict, cfg) -> None:
    """Parameters plus the rank-0 ``config.*`` blocks that rebuild the model config."""
    from .model import config_to_blocks

    save_checkpoint(path, {**config_to_blocks(cfg), **params})


def load_model(path):
    """(params, ModelConfig) from a checkpoint written by save_model."""
    from .model import config_from_blocks, init_params

    blocks = load_checkpoint(path)
    try:
        cfg = config_from_blocks(blocks)
    except KeyError as exc:
        raise CheckpointError(f"{path}: missing model config block {exc}") from None
    params = {k: v for k, v in blocks.items() if not k.startswith("config.")}
    expected = init_params(cfg, 0)
    if set(params) != set(expected):
        missing = sorted(set(expected) - set(params))
        extra = sorted(set(params) - set(expected))
        raise CheckpointError(f"{path}: parameter blocks do not match the stored config "
                              f"(missing {missing[:3]}, unexpected {extra[:3]})")
    for k, v in expected.items():
        if params[k].shape != v.shape:
            raise CheckpointError(f"{path}: block {k} has shape {params[k].shape}, expected {v.shape}")
    return params, cfg
