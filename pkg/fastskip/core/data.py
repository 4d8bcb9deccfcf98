"""Synthetic speech-like task and its on-disk dataset format.

Each vocabulary token owns a fixed random prototype vector. An utterance
renders its target tokens as runs of the token's prototype (a sampled number
of frames each), optionally separated by silence runs around the zero
vector, then adds Gaussian noise to every frame. Adjacent identical tokens
are always separated by silence so the CTC head can tell them apart.

Binary format (all little-endian)::

    header    <4sHIII   magic "FSKD", version, vocab_size, feat_dim, count
    per utterance:
      <I        id length, then id bytes (utf-8)
      <I        U, then U x <i4 token ids
      <I        T, then T*F x <f8 features, row-major

The manifest is one line per utterance: ``id T U id_1 ... id_U``.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List

import numpy as np

from fastskip.utils.atomic import atomic_write_bytes
from fastskip.utils.exceptions import (
    ConfigurationError,
    CorruptFileError,
    FileFormatError,
)

from .config import TaskConfig
from .losses import ctc_min_frames

DATASET_MAGIC = b"FSKD"
DATASET_VERSION = 1

_HEADER = struct.Struct("<4sHIII")
_U32 = struct.Struct("<I")

# Sub-streams of the task seed. Prototypes are shared by every split.
PROTOTYPE_STREAM = 0
SPLIT_STREAMS: Dict[str, int] = {"train": 1, "dev": 2, "test": 3}

# Consecutive unalignable draws tolerated before the task is declared infeasible.
MAX_REJECTED_DRAWS = 1000


@dataclass(frozen=True)
class Utterance:
    """Feature frames ``(T, F)`` with their target token ids (1..V)."""

    id: str
    features: np.ndarray
    targets: np.ndarray

    @property
    def num_frames(self) -> int:
        return int(self.features.shape[0])

    @property
    def num_targets(self) -> int:
        return int(self.targets.shape[0])


@dataclass
class Dataset:
    vocab_size: int
    feat_dim: int
    utterances: List[Utterance] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.utterances)

    def __iter__(self):
        return iter(self.utterances)

    def __getitem__(self, index: int) -> Utterance:
        return self.utterances[index]


def prototypes(cfg: TaskConfig) -> np.ndarray:
    """``(V, F)`` unit-Gaussian prototypes; row ``k-1`` renders token k."""
    rng = np.random.default_rng([cfg.seed, PROTOTYPE_STREAM])
    return rng.standard_normal((cfg.vocab_size, cfg.feat_dim))


def _sample_utterance(
    cfg: TaskConfig, rng: np.random.Generator, protos: np.ndarray, utt_id: str
) -> Utterance:
    U = int(rng.integers(cfg.min_target_len, cfg.max_target_len + 1))
    targets = rng.integers(1, cfg.vocab_size + 1, size=U).astype(np.int32)

    segments = []
    for i, token in enumerate(targets):
        if i > 0:
            gap = rng.random() < cfg.silence_gap_prob
            if gap or token == targets[i - 1]:
                n_sil = int(rng.integers(cfg.silence_gap_min, cfg.silence_gap_max + 1))
                segments.append(np.zeros((n_sil, cfg.feat_dim)))
        duration = int(
            rng.integers(cfg.min_frames_per_token, cfg.max_frames_per_token + 1)
        )
        segments.append(np.tile(protos[token - 1], (duration, 1)))

    clean = np.concatenate(segments, axis=0)
    noise = cfg.noise_std * rng.standard_normal(clean.shape)
    return Utterance(id=utt_id, features=clean + noise, targets=targets)


def is_alignable(utt: Utterance, subsample_factor: int) -> bool:
    """The subsampled utterance has room for a CTC alignment of its targets."""
    encoded = math.ceil(utt.num_frames / subsample_factor)
    return encoded >= ctc_min_frames(utt.targets.tolist())


def generate(cfg: TaskConfig, n: int, split: str = "train") -> Dataset:
    """Generate ``n`` utterances; deterministic given ``cfg.seed`` and ``split``."""
    if n < 1:
        raise ConfigurationError("utterance count must be >= 1", config_key="n")
    if split not in SPLIT_STREAMS:
        raise ConfigurationError(f"Unknown split: {split}", config_key="split")

    protos = prototypes(cfg)
    rng = np.random.default_rng([cfg.seed, SPLIT_STREAMS[split]])
    utterances: List[Utterance] = []
    rejected = 0
    while len(utterances) < n:
        utt = _sample_utterance(cfg, rng, protos, f"{split}-{len(utterances):05d}")
        if is_alignable(utt, cfg.subsample_factor):
            utterances.append(utt)
            rejected = 0
            continue
        rejected += 1
        if rejected >= MAX_REJECTED_DRAWS:
            raise ConfigurationError(
                f"{rejected} consecutive utterances too short to align after "
                f"subsampling by {cfg.subsample_factor}; lengthen tokens or gaps",
                config_key="subsample",
            )
    return Dataset(
        vocab_size=cfg.vocab_size, feat_dim=cfg.feat_dim, utterances=utterances
    )


def summarize(dataset: Dataset) -> Dict[str, float]:
    """Corpus statistics shown by ``fastskip gen``."""
    if not dataset.utterances:
        return {"count": 0}
    frames = np.array([u.num_frames for u in dataset])
    tokens = np.array([u.num_targets for u in dataset])
    return {
        "count": len(dataset),
        "total_frames": int(frames.sum()),
        "total_tokens": int(tokens.sum()),
        "mean_frames": float(frames.mean()),
        "mean_tokens": float(tokens.mean()),
        "mean_frames_per_token": float(np.mean(frames / tokens)),
    }


# ── Serialization ────────────────────────────────────────────────────────


def dataset_to_bytes(dataset: Dataset) -> bytes:
    parts = [
        _HEADER.pack(
            DATASET_MAGIC,
            DATASET_VERSION,
            dataset.vocab_size,
            dataset.feat_dim,
            len(dataset),
        )
    ]
    for utt in dataset:
        if utt.features.ndim != 2 or utt.features.shape[1] != dataset.feat_dim:
            raise ConfigurationError(
                f"Utterance {utt.id} has feature shape {utt.features.shape}",
                config_key="feat_dim",
            )
        raw_id = utt.id.encode("utf-8")
        parts.append(_U32.pack(len(raw_id)))
        parts.append(raw_id)
        parts.append(_U32.pack(utt.num_targets))
        parts.append(np.asarray(utt.targets, dtype="<i4").tobytes())
        parts.append(_U32.pack(utt.num_frames))
        parts.append(np.ascontiguousarray(utt.features, dtype="<f8").tobytes())
    return b"".join(parts)


class ByteReader:
    """Bounds-checked cursor over a byte buffer."""

    def __init__(self, data: bytes, path: str):
        self.data = data
        self.path = path
        self.offset = 0

    def take(self, n: int) -> bytes:
        end = self.offset + n
        if end > len(self.data):
            raise CorruptFileError(
                f"Truncated file: need {end} bytes, have {len(self.data)}",
                path=self.path,
            )
        chunk = self.data[self.offset : end]
        self.offset = end
        return chunk

    def unpack(self, st: struct.Struct) -> tuple:
        return st.unpack(self.take(st.size))

    def finish(self) -> None:
        if self.offset != len(self.data):
            raise CorruptFileError(
                f"{len(self.data) - self.offset} trailing bytes", path=self.path
            )


def dataset_from_bytes(data: bytes, path: str = "<memory>") -> Dataset:
    reader = ByteReader(data, path)
    if len(data) < _HEADER.size:
        raise CorruptFileError("File shorter than dataset header", path=path)
    magic, version, vocab_size, feat_dim, count = reader.unpack(_HEADER)
    if magic != DATASET_MAGIC:
        raise FileFormatError(f"Not a dataset file (magic {magic!r})", path=path)
    if version != DATASET_VERSION:
        raise FileFormatError(f"Unsupported dataset version {version}", path=path)

    utterances: List[Utterance] = []
    for _ in range(count):
        (id_len,) = reader.unpack(_U32)
        raw_id = reader.take(id_len)
        try:
            utt_id = raw_id.decode("utf-8")
        except UnicodeDecodeError as e:
            raise CorruptFileError(f"Utterance id is not utf-8: {e}", path=path)
        (U,) = reader.unpack(_U32)
        targets = np.frombuffer(reader.take(4 * U), dtype="<i4").astype(np.int32)
        (T,) = reader.unpack(_U32)
        features = np.frombuffer(reader.take(8 * T * feat_dim), dtype="<f8")
        utterances.append(
            Utterance(
                id=utt_id,
                features=features.reshape(T, feat_dim).astype(np.float64),
                targets=targets,
            )
        )
    reader.finish()
    return Dataset(vocab_size=vocab_size, feat_dim=feat_dim, utterances=utterances)


def save_dataset(dataset: Dataset, path: str | Path) -> Path:
    return atomic_write_bytes(path, dataset_to_bytes(dataset))


def load_dataset(path: str | Path) -> Dataset:
    path = Path(path)
    return dataset_from_bytes(path.read_bytes(), path=str(path))


def write_manifest(dataset: Dataset, path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = []
    for utt in dataset:
        ids = " ".join(str(int(t)) for t in utt.targets)
        lines.append(f"{utt.id} {utt.num_frames} {utt.num_targets} {ids}".rstrip())
    path.write_text("\n".join(lines) + ("\n" if lines else ""), encoding="utf-8")
    return path
