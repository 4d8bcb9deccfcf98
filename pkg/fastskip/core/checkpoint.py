"""Model checkpoint file.

Layout (little-endian)::

    header  <4sHIIIIIQ  magic "FSKM", version, vocab_size, feat_dim,
                        hidden_size, context, subsample, training step
    then every tensor of PARAM_NAMES in order as <f8, row-major

Tensor shapes follow from the header, so the file carries no shape table.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Optional

import numpy as np

from fastskip.utils.atomic import atomic_write_bytes
from fastskip.utils.exceptions import (
    CheckpointMismatchError,
    CorruptFileError,
    FileFormatError,
)

from .config import ModelConfig
from .data import ByteReader
from .model import PARAM_NAMES, TinyTransducer, param_shapes

CHECKPOINT_MAGIC = b"FSKM"
CHECKPOINT_VERSION = 1

_HEADER = struct.Struct("<4sHIIIIIQ")


@dataclass(frozen=True)
class Checkpoint:
    params: TinyTransducer
    step: int


def checkpoint_to_bytes(params: TinyTransducer, step: int) -> bytes:
    cfg = params.config
    parts = [
        _HEADER.pack(
            CHECKPOINT_MAGIC,
            CHECKPOINT_VERSION,
            cfg.vocab_size,
            cfg.feat_dim,
            cfg.hidden_size,
            cfg.context,
            cfg.subsample,
            step,
        )
    ]
    for name in PARAM_NAMES:
        parts.append(np.ascontiguousarray(params.tensors[name], dtype="<f8").tobytes())
    return b"".join(parts)


def checkpoint_from_bytes(data: bytes, path: str = "<memory>") -> Checkpoint:
    if len(data) < _HEADER.size:
        raise CorruptFileError("File shorter than checkpoint header", path=path)
    reader = ByteReader(data, path)
    magic, version, V, F, H, k, s, step = reader.unpack(_HEADER)
    if magic != CHECKPOINT_MAGIC:
        raise FileFormatError(f"Not a checkpoint file (magic {magic!r})", path=path)
    if version != CHECKPOINT_VERSION:
        raise FileFormatError(f"Unsupported checkpoint version {version}", path=path)

    # init_seed is not stored; it only matters before the first step.
    cfg = ModelConfig(vocab_size=V, feat_dim=F, hidden_size=H, context=k, subsample=s)
    tensors = {}
    for name, shape in param_shapes(cfg).items():
        count = int(np.prod(shape))
        raw = reader.take(8 * count)
        tensors[name] = np.frombuffer(raw, dtype="<f8").reshape(shape).astype(np.float64)
    reader.finish()
    return Checkpoint(params=TinyTransducer(config=cfg, tensors=tensors), step=step)


def save_checkpoint(path: str | Path, params: TinyTransducer, step: int) -> Path:
    return atomic_write_bytes(path, checkpoint_to_bytes(params, step))


def load_checkpoint(
    path: str | Path, expected: Optional[ModelConfig] = None
) -> Checkpoint:
    """Load a checkpoint, optionally checking it against the configured model."""
    path = Path(path)
    try:
        data = path.read_bytes()
    except FileNotFoundError:
        raise FileFormatError("Checkpoint file not found", path=str(path))
    ckpt = checkpoint_from_bytes(data, path=str(path))
    if expected is not None:
        check_compatible(ckpt.params.config, expected)
        # Carry the configured init_seed so the resolved config round-trips.
        params = TinyTransducer(
            config=replace(ckpt.params.config, init_seed=expected.init_seed),
            tensors=ckpt.params.tensors,
        )
        ckpt = Checkpoint(params=params, step=ckpt.step)
    return ckpt


def check_compatible(found: ModelConfig, expected: ModelConfig) -> None:
    for field_name in ("vocab_size", "feat_dim", "hidden_size", "context", "subsample"):
        got, want = getattr(found, field_name), getattr(expected, field_name)
        if got != want:
            raise CheckpointMismatchError(field_name, got, want)
