"""Versioned parameter checkpoints.

Layout: ``MAGIC | u32 version | u32 header length | JSON header | f8 data``.
The header records the seed, the full configuration and the name and shape
of every parameter; the data block holds the parameters in declaration
order as little-endian float64. Loading rebuilds the network and copies the
values back, so forward outputs are bit-identical.
"""

from __future__ import annotations

import dataclasses
import json
import struct

import numpy as np
import torch

from ..errors import BadMagic, CountMismatch
from ..pipeline.config import EmbeddingConfig, TrainConfig
from ..pipeline.model import ScoreNetwork
from .atomic import atomic_write

MAGIC = b"SURFBRIDGE-CKPT\n"
FORMAT_VERSION = 1


def checkpoint_bytes(model: ScoreNetwork, config: TrainConfig) -> bytes:
    params = list(model.named_parameters())
    header = {
        "format_version": FORMAT_VERSION,
        "seed": model.seed,
        "K": model.K,
        "config": config.to_dict(),
        "embedding": dataclasses.asdict(model.cfg),
        "params": [{"name": n, "shape": list(p.shape)} for n, p in params],
    }
    blob = json.dumps(header, sort_keys=True).encode()
    data = b"".join(np.ascontiguousarray(p.detach().numpy(), dtype="<f8").tobytes() for _, p in params)
    return MAGIC + struct.pack("<II", FORMAT_VERSION, len(blob)) + blob + data


def checkpoint_from_bytes(raw: bytes):
    """Returns ``(model, config)``."""
    if not raw.startswith(MAGIC):
        raise BadMagic("not a checkpoint file")
    off = len(MAGIC)
    try:
        version, n = struct.unpack_from("<II", raw, off)
    except struct.error:
        raise BadMagic(f"truncated checkpoint header at byte {off}") from None
    if version != FORMAT_VERSION:
        raise BadMagic(f"unsupported checkpoint version {version}")
    off += 8
    try:
        header = json.loads(raw[off : off + n].decode())
        config = TrainConfig(**header["config"])
        model = ScoreNetwork(EmbeddingConfig(**header["embedding"]), header["K"], header["seed"])
    except (UnicodeDecodeError, ValueError, KeyError, TypeError) as exc:
        raise BadMagic(f"unreadable checkpoint header at byte {off}: {exc}") from None
    off += n
    params = dict(model.named_parameters())
    expected = [(k, list(p.shape)) for k, p in params.items()]
    stored = [(p["name"], p["shape"]) for p in header["params"]]
    if expected != stored:
        raise CountMismatch("checkpoint parameters do not match the network layout")
    total = sum(int(np.prod(s)) for _, s in stored)
    if len(raw) - off != 8 * total:
        raise CountMismatch(f"expected {8 * total} data bytes, found {len(raw) - off}")
    with torch.no_grad():
        for name, shape in stored:
            count = int(np.prod(shape))
            arr = np.frombuffer(raw, dtype="<f8", count=count, offset=off).reshape(shape)
            params[name].copy_(torch.from_numpy(arr.astype(float)))
            off += 8 * count
    return model, config


def save_checkpoint(path, model: ScoreNetwork, config: TrainConfig):
    atomic_write(path, checkpoint_bytes(model, config))


def load_checkpoint(path):
    with open(path, "rb") as fh:
        return checkpoint_from_bytes(fh.read())
