"""Shared pytest fixtures for the fastskip test suite.

Model-level fixtures use a deliberately tiny configuration (V=5, H=8) so
finite-difference checks over every parameter stay fast. ``tiny_run`` holds
``--set`` overrides for CLI tests that train for a handful of steps only.
"""

from __future__ import annotations

import logging
from typing import Iterator, List, Tuple

import numpy as np
import pytest

from fastskip.core import telemetry
from fastskip.core.config import ModelConfig, TaskConfig
from fastskip.core.data import Utterance
from fastskip.core.lattice import NodeProbs
from fastskip.core.logspace import log_softmax
from fastskip.core.model import TinyTransducer


@pytest.fixture(autouse=True)
def _isolated_metrics() -> Iterator[None]:
    """Decoders publish through the singleton; keep it a no-op between tests."""
    saved = telemetry._metrics
    telemetry._metrics = telemetry.FastSkipMetrics(enabled=False)
    try:
        yield
    finally:
        telemetry._metrics = saved


@pytest.fixture(autouse=True)
def _quiet_fastskip_logger() -> Iterator[None]:
    logger = logging.getLogger("fastskip")
    handlers, level, propagate = list(logger.handlers), logger.level, logger.propagate
    try:
        yield
    finally:
        logger.handlers[:] = handlers
        logger.setLevel(level)
        logger.propagate = propagate


def random_node_probs(
    rng: np.random.Generator, T: int, U: int, V: int = 4
) -> Tuple[NodeProbs, List[int]]:
    """Node probabilities taken from random softmax rows over V labels + blank."""
    targets = [int(t) for t in rng.integers(1, V + 1, size=U)]
    logprobs = log_softmax(rng.normal(scale=2.0, size=(T, U + 1, V + 1)))
    blank = logprobs[:, :, 0]
    label = logprobs[:, np.arange(U), targets] if U else np.zeros((T, 0))
    return NodeProbs.from_arrays(blank, label), targets


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)


@pytest.fixture
def small_model_cfg() -> ModelConfig:
    return ModelConfig(
        vocab_size=5, feat_dim=3, hidden_size=8, context=1, subsample=2, init_seed=3
    )


@pytest.fixture
def small_params(small_model_cfg: ModelConfig) -> TinyTransducer:
    params = TinyTransducer.init(small_model_cfg)
    # Nonzero biases so their gradients are exercised too.
    bias_rng = np.random.default_rng(7)
    for name in ("enc_b", "join_b", "out_b", "ctc_b"):
        params.tensors[name] = bias_rng.normal(scale=0.3, size=params.tensors[name].shape)
    return params


@pytest.fixture
def small_utterance(small_model_cfg: ModelConfig) -> Utterance:
    """12 raw frames -> T'=6 encoded frames, U=2."""
    feats = np.random.default_rng(11).normal(size=(12, small_model_cfg.feat_dim))
    return Utterance(id="u-0", features=feats, targets=np.array([2, 4], dtype=np.int32))


@pytest.fixture
def small_task() -> TaskConfig:
    return TaskConfig(
        vocab_size=5,
        feat_dim=3,
        min_target_len=2,
        max_target_len=4,
        min_frames_per_token=2,
        max_frames_per_token=4,
        silence_gap_prob=0.5,
        silence_gap_min=1,
        silence_gap_max=4,
        seed=1,
        subsample_factor=2,
    )


@pytest.fixture
def tiny_run(tmp_path) -> List[str]:
    """CLI overrides for a seconds-long end-to-end run under ``tmp_path``."""
    settings = {
        "vocab_size": 4,
        "feat_dim": 3,
        "max_target_len": 4,
        "silence_gap_min": 1,
        "silence_gap_max": 4,
        "n_train": 8,
        "n_dev": 3,
        "n_test": 3,
        "hidden_size": 6,
        "max_steps": 6,
        "batch_size": 2,
        "log_every": 2,
        "checkpoint_every": 3,
        "data_dir": str(tmp_path / "data"),
        "out_dir": str(tmp_path / "run"),
    }
    args: List[str] = []
    for key, value in settings.items():
        args += ["--set", f"{key}={value}"]
    return args


@pytest.fixture
def make_node_probs():
    return random_node_probs
