"""Configuration for fastskip.

Each concern has a small dataclass validated in ``__post_init__``. An
experiment is described by :class:`ExperimentConfig`, a flat ``key = value``
file that resolves into those dataclasses::

    # runs/base.cfg
    fsr_lambda = 0.01
    delta = 0.5
    w_left = 1
    w_right = 1

Unknown keys are rejected. Every CLI run writes its resolved config next to
its outputs so the run can be repeated from that file alone.
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, Mapping, Optional

from pydantic import BaseModel, ConfigDict, ValidationError

from fastskip.utils.exceptions import ConfigurationError

CONFIG_ENV_VAR = "FASTSKIP_CONFIG"


def _require(condition: bool, message: str, key: str) -> None:
    if not condition:
        raise ConfigurationError(message, config_key=key)


@dataclass(frozen=True)
class TaskConfig:
    """Synthetic task: token prototypes rendered over frames with silence gaps."""

    vocab_size: int = 16
    feat_dim: int = 8
    min_target_len: int = 2
    max_target_len: int = 6
    min_frames_per_token: int = 2
    max_frames_per_token: int = 4
    # Long silences keep a dilated CTC spike well under half of the encoded
    # frames of an utterance.
    silence_gap_prob: float = 1.0
    silence_gap_min: int = 20
    silence_gap_max: int = 40
    noise_std: float = 0.3
    seed: int = 0
    # Encoder frame-rate reduction; utterances the encoder could not align
    # under CTC are regenerated.
    subsample_factor: int = 2

    def __post_init__(self) -> None:
        _require(self.vocab_size >= 1, "vocab_size must be positive", "vocab_size")
        _require(self.feat_dim >= 1, "feat_dim must be positive", "feat_dim")
        _require(
            1 <= self.min_target_len <= self.max_target_len,
            "need 1 <= min_target_len <= max_target_len",
            "min_target_len",
        )
        _require(
            1 <= self.min_frames_per_token <= self.max_frames_per_token,
            "need 1 <= min_frames_per_token <= max_frames_per_token",
            "min_frames_per_token",
        )
        _require(
            0.0 <= self.silence_gap_prob <= 1.0,
            "silence_gap_prob must lie in [0, 1]",
            "silence_gap_prob",
        )
        _require(
            1 <= self.silence_gap_min <= self.silence_gap_max,
            "need 1 <= silence_gap_min <= silence_gap_max",
            "silence_gap_min",
        )
        _require(self.noise_std >= 0.0, "noise_std must be >= 0", "noise_std")
        _require(self.seed >= 0, "seed must be >= 0", "data_seed")
        _require(
            self.subsample_factor >= 1,
            "subsample_factor must be positive",
            "subsample",
        )


@dataclass(frozen=True)
class ModelConfig:
    """Sizes of the tiny transducer. Output layers have ``vocab_size + 1`` rows."""

    vocab_size: int = 16
    feat_dim: int = 8
    hidden_size: int = 32
    context: int = 1
    subsample: int = 2
    init_seed: int = 0

    def __post_init__(self) -> None:
        _require(self.vocab_size >= 1, "vocab_size must be positive", "vocab_size")
        _require(self.feat_dim >= 1, "feat_dim must be positive", "feat_dim")
        _require(self.hidden_size >= 1, "hidden_size must be positive", "hidden_size")
        _require(self.context >= 0, "context must be >= 0", "context")
        _require(self.subsample >= 1, "subsample must be positive", "subsample")
        _require(self.init_seed >= 0, "init_seed must be >= 0", "init_seed")

    @property
    def output_size(self) -> int:
        return self.vocab_size + 1

    @property
    def stacked_dim(self) -> int:
        return self.feat_dim * (2 * self.context + 1)


@dataclass(frozen=True)
class FsrConfig:
    """Fast-skip regularization weight and the CTC coefficient of the joint loss."""

    fsr_lambda: float = 0.01
    ctc_weight: float = 1.0

    def __post_init__(self) -> None:
        _require(self.fsr_lambda >= 0.0, "fsr_lambda must be >= 0", "fsr_lambda")
        _require(self.ctc_weight >= 0.0, "ctc_weight must be >= 0", "ctc_weight")


@dataclass(frozen=True)
class SkipConfig:
    """Fast-skip inference: frames with CTC blank probability above delta are skipped."""

    delta: float = 0.5
    w_left: int = 1
    w_right: int = 1
    max_symbols_per_frame: int = 5

    def __post_init__(self) -> None:
        _require(0.0 <= self.delta <= 1.0, "delta must lie in [0, 1]", "delta")
        _require(self.w_left >= 0, "w_left must be >= 0", "w_left")
        _require(self.w_right >= 0, "w_right must be >= 0", "w_right")
        _require(
            self.max_symbols_per_frame >= 1,
            "max_symbols_per_frame must be positive",
            "max_symbols_per_frame",
        )


@dataclass(frozen=True)
class TrainConfig:
    """Plain SGD with global-norm clipping."""

    learning_rate: float = 0.1
    batch_size: int = 4
    max_steps: int = 3000
    clip_norm: float = 5.0
    seed: int = 0
    log_every: int = 100
    checkpoint_every: int = 500

    def __post_init__(self) -> None:
        _require(
            self.learning_rate > 0.0, "learning_rate must be positive", "learning_rate"
        )
        _require(self.batch_size >= 1, "batch_size must be positive", "batch_size")
        _require(self.max_steps >= 0, "max_steps must be >= 0", "max_steps")
        _require(self.clip_norm > 0.0, "clip_norm must be positive", "clip_norm")
        _require(self.seed >= 0, "train_seed must be >= 0", "train_seed")
        _require(self.log_every >= 1, "log_every must be positive", "log_every")
        _require(
            self.checkpoint_every >= 1,
            "checkpoint_every must be positive",
            "checkpoint_every",
        )


class ExperimentConfig(BaseModel):
    """Flat, human-editable description of one experiment."""

    model_config = ConfigDict(extra="forbid", validate_assignment=True)

    # Task
    vocab_size: int = 16
    feat_dim: int = 8
    min_target_len: int = 2
    max_target_len: int = 6
    min_frames_per_token: int = 2
    max_frames_per_token: int = 4
    silence_gap_prob: float = 1.0
    silence_gap_min: int = 20
    silence_gap_max: int = 40
    noise_std: float = 0.3
    data_seed: int = 0
    n_train: int = 2000
    n_dev: int = 200
    n_test: int = 200

    # Model
    hidden_size: int = 32
    context: int = 1
    subsample: int = 2
    init_seed: int = 0

    # Objective
    fsr_lambda: float = 0.01
    ctc_weight: float = 1.0

    # Inference
    delta: float = 0.5
    w_left: int = 1
    w_right: int = 1
    max_symbols_per_frame: int = 5

    # Optimizer
    learning_rate: float = 0.1
    batch_size: int = 4
    max_steps: int = 3000
    clip_norm: float = 5.0
    train_seed: int = 0
    log_every: int = 100
    checkpoint_every: int = 500

    # Paths and execution
    data_dir: str = "data"
    out_dir: str = "runs/default"
    threads: int = 1

    # ── Parsing ──────────────────────────────────────────────────────────

    @classmethod
    def from_mapping(cls, values: Mapping[str, Any]) -> "ExperimentConfig":
        unknown = sorted(set(values) - set(cls.model_fields))
        if unknown:
            raise ConfigurationError(
                f"Unknown config key(s): {', '.join(unknown)}", config_key=unknown[0]
            )
        try:
            cfg = cls(**dict(values))
        except ValidationError as e:
            first = e.errors()[0]
            key = str(first["loc"][0]) if first.get("loc") else None
            raise ConfigurationError(
                f"Invalid config value: {first['msg']}", config_key=key
            )
        cfg.validate_sections()
        return cfg

    @classmethod
    def from_text(cls, text: str) -> "ExperimentConfig":
        return cls.from_mapping(parse_key_values(text))

    @classmethod
    def from_file(cls, path: str | Path) -> "ExperimentConfig":
        try:
            text = Path(path).read_text(encoding="utf-8")
        except OSError as e:
            raise ConfigurationError(f"Cannot read config file {path}: {e}")
        return cls.from_text(text)

    @classmethod
    def resolve(
        cls, path: Optional[str | Path] = None, overrides: Optional[Mapping] = None
    ) -> "ExperimentConfig":
        """File (explicit path, else ``$FASTSKIP_CONFIG``) then overrides."""
        values: Dict[str, Any] = {}
        source = path or os.environ.get(CONFIG_ENV_VAR)
        if source:
            values.update(cls.from_file(source).model_dump())
        values.update(overrides or {})
        return cls.from_mapping(values)

    def with_overrides(self, overrides: Mapping[str, Any]) -> "ExperimentConfig":
        return self.from_mapping({**self.model_dump(), **dict(overrides)})

    def to_text(self) -> str:
        lines = [f"{key} = {value}" for key, value in self.model_dump().items()]
        return "\n".join(lines) + "\n"

    def write(self, path: str | Path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(self.to_text(), encoding="utf-8")
        return path

    # ── Sections ─────────────────────────────────────────────────────────

    def validate_sections(self) -> None:
        """Build every section once so range errors surface at load time."""
        self.task()
        self.model()
        self.fsr()
        self.skip()
        self.train()
        _require(self.n_train >= 1, "n_train must be positive", "n_train")
        _require(self.n_dev >= 1, "n_dev must be positive", "n_dev")
        _require(self.n_test >= 1, "n_test must be positive", "n_test")
        _require(self.threads >= 1, "threads must be positive", "threads")

    def task(self) -> TaskConfig:
        return TaskConfig(
            vocab_size=self.vocab_size,
            feat_dim=self.feat_dim,
            min_target_len=self.min_target_len,
            max_target_len=self.max_target_len,
            min_frames_per_token=self.min_frames_per_token,
            max_frames_per_token=self.max_frames_per_token,
            silence_gap_prob=self.silence_gap_prob,
            silence_gap_min=self.silence_gap_min,
            silence_gap_max=self.silence_gap_max,
            noise_std=self.noise_std,
            seed=self.data_seed,
            subsample_factor=self.subsample,
        )

    def model(self) -> ModelConfig:
        return ModelConfig(
            vocab_size=self.vocab_size,
            feat_dim=self.feat_dim,
            hidden_size=self.hidden_size,
            context=self.context,
            subsample=self.subsample,
            init_seed=self.init_seed,
        )

    def fsr(self) -> FsrConfig:
        return FsrConfig(fsr_lambda=self.fsr_lambda, ctc_weight=self.ctc_weight)

    def skip(self) -> SkipConfig:
        return SkipConfig(
            delta=self.delta,
            w_left=self.w_left,
            w_right=self.w_right,
            max_symbols_per_frame=self.max_symbols_per_frame,
        )

    def train(self) -> TrainConfig:
        return TrainConfig(
            learning_rate=self.learning_rate,
            batch_size=self.batch_size,
            max_steps=self.max_steps,
            clip_norm=self.clip_norm,
            seed=self.train_seed,
            log_every=self.log_every,
            checkpoint_every=self.checkpoint_every,
        )


def parse_key_values(text: str) -> Dict[str, str]:
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    values: Dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigurationError(f"Line {lineno}: expected 'key = value'")
        key, value = (part.strip() for part in line.split("=", 1))
        if not key:
            raise ConfigurationError(f"Line {lineno}: empty key")
        if key in values:
            raise ConfigurationError(
                f"Line {lineno}: duplicate key {key}", config_key=key
            )
        values[key] = value
    return values
