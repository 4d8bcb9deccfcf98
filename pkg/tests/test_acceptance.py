"""Desk-scale acceptance runs on the default synthetic task.

Trains a lambda=0 and a lambda=0.01 model with the default configuration
(minutes of single-threaded numpy), then checks the decoding trends:

1. Both models reach a held-out CER below 10%, within 2 points of each other.
2. Fast-skip on the regularized model halves joint calls at <= 2 points CER cost.
3. Without regularization, fast-skip costs strictly more CER.
4. Widening the spike window triggers more frames and does not hurt CER.
5. delta = 1 reproduces greedy output exactly.
6. Greedy decoding spends most of its frame advances on blank.

Set ``FASTSKIP_ACCEPTANCE=1`` to run.
"""

from __future__ import annotations

import math
import os
import time
from typing import Dict

import numpy as np
import pytest

from fastskip.core.config import ExperimentConfig, SkipConfig
from fastskip.core.data import generate
from fastskip.core.decoder import fast_skip_decode, greedy_decode
from fastskip.core.evaluation import evaluate
from fastskip.core.model import TinyTransducer, encode
from fastskip.core.training import TrainResult, moving_average, train

pytestmark = [
    pytest.mark.slow,
    pytest.mark.skipif(
        not os.environ.get("FASTSKIP_ACCEPTANCE"),
        reason="set FASTSKIP_ACCEPTANCE=1 for the training runs",
    ),
]

FAST = SkipConfig(delta=0.5, w_left=1, w_right=1)


@pytest.fixture(scope="module")
def experiment():
    cfg = ExperimentConfig()
    task = cfg.task()
    return {
        "cfg": cfg,
        "train": generate(task, cfg.n_train, split="train").utterances,
        "test": generate(task, cfg.n_test, split="test").utterances,
    }


@pytest.fixture(scope="module")
def runs(experiment) -> Dict[float, TrainResult]:
    cfg = experiment["cfg"]
    results = {}
    for lam in (0.0, 0.01):
        run = cfg.with_overrides({"fsr_lambda": lam})
        start = time.perf_counter()
        results[lam] = train(
            TinyTransducer.init(run.model()), experiment["train"], run.fsr(), run.train()
        )
        assert time.perf_counter() - start < 600.0
    return results


@pytest.fixture(scope="module")
def models(runs) -> Dict[float, TinyTransducer]:
    return {lam: result.params for lam, result in runs.items()}


def cer(params, experiment, mode, skip=FAST) -> float:
    report, _ = evaluate(params, experiment["test"], skip, mode)
    return report.cer


def test_loss_trends_down(runs):
    for result in runs.values():
        losses = [r.joint_loss for r in result.records]
        assert all(math.isfinite(x) for x in losses)
        # one 100-step average per 100 steps; 5% slack for batch noise
        blocks = moving_average(losses, 100)[::100]
        assert len(blocks) >= 10
        assert np.all(np.diff(blocks) <= 0.05 * blocks[:-1])


def test_training_converges(models, experiment):
    base = cer(models[0.0], experiment, "greedy")
    fsr = cer(models[0.01], experiment, "greedy")
    assert base < 0.10
    assert abs(fsr - base) <= 0.02


def test_fast_skip_halves_joint_calls(models, experiment):
    greedy, _ = evaluate(models[0.01], experiment["test"], FAST, "greedy")
    fast, _ = evaluate(models[0.01], experiment["test"], FAST, "fastskip")
    assert fast.joint_calls_total <= 0.5 * greedy.joint_calls_total
    assert fast.cer - greedy.cer <= 0.02


def test_regularizer_protects_fast_skip(models, experiment):
    fsr_cost = cer(models[0.01], experiment, "fastskip") - cer(
        models[0.01], experiment, "greedy"
    )
    base_cost = cer(models[0.0], experiment, "fastskip") - cer(
        models[0.0], experiment, "greedy"
    )
    assert base_cost > fsr_cost


def test_window_widening(models, experiment):
    reports = []
    for w in (0, 1, 2):
        skip = SkipConfig(delta=0.5, w_left=w, w_right=w)
        report, _ = evaluate(models[0.01], experiment["test"], skip, "fastskip")
        reports.append(report)
    for narrow, wide in zip(reports, reports[1:]):
        assert wide.triggered_frames >= narrow.triggered_frames
        assert wide.joint_calls_total >= narrow.joint_calls_total
        assert wide.cer <= narrow.cer


def test_delta_one_is_greedy(models, experiment):
    params = models[0.01]
    for utt in experiment["test"]:
        enc = encode(params, utt.features)
        fast = fast_skip_decode(params, enc, SkipConfig(delta=1.0))
        assert fast.tokens == greedy_decode(params, enc).tokens


def test_greedy_is_mostly_blank(models, experiment):
    report, _ = evaluate(models[0.01], experiment["test"], FAST, "greedy")
    assert report.blank_fraction >= 0.60
