"""Joint-objective gradients and the SGD training loop.

One step draws ``batch_size`` utterances with replacement from an RNG seeded
by ``(train_seed, step)``, averages the per-utterance gradients in batch
order, clips the global norm and applies plain SGD. Because the batch of
step n depends only on the seed and n, a run resumed from a step-n
checkpoint retraces the uninterrupted run exactly.
"""

from __future__ import annotations

import csv
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

from fastskip.utils.exceptions import (
    EmptyUtteranceError,
    NonFiniteLossError,
    TrainingDivergedError,
)

from .config import FsrConfig, TrainConfig
from .data import Utterance
from .logging import get_logger
from .losses import (
    ctc_loss_and_grad,
    fsr_lattice_grads,
    fsr_surrogate,
    joint_loss,
    transducer_loss,
)
from .model import Gradients, TinyTransducer, backward, build_lattice, zero_grads
from .telemetry import get_metrics

logger = get_logger("fastskip.training")

LOG_COLUMNS = (
    "step",
    "transducer_loss",
    "ctc_loss",
    "fsr_surrogate",
    "joint_loss",
    "grad_norm",
)


@dataclass(frozen=True)
class StepRecord:
    """Batch-mean losses of one optimizer step and the pre-clipping gradient norm."""

    step: int
    transducer_loss: float
    ctc_loss: float
    fsr_surrogate: float
    joint_loss: float
    grad_norm: float

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class UtteranceLoss:
    transducer: float
    ctc: float
    surrogate: float
    joint: float
    grads: Gradients
    joint_evals: int


def loss_and_grads(
    params: TinyTransducer, utterance: Utterance, fsr_cfg: FsrConfig
) -> UtteranceLoss:
    """Losses of one utterance and the gradients the optimizer applies.

    With ``fsr_lambda = 0`` the gradients are exactly those of
    ``ctc_weight * L_CTC + L_transducer``.
    """
    forward = build_lattice(params, utterance.features, utterance.targets)
    lattice = forward.lattice()

    tr = transducer_loss(lattice)
    ctc, ctc_logit_grad = ctc_loss_and_grad(
        forward.encoded.ctc_logprobs, forward.targets
    )
    surrogate = fsr_surrogate(lattice, forward.blank_post)
    joint = joint_loss(tr, ctc, surrogate, fsr_cfg)

    lattice_grad = fsr_lattice_grads(lattice, forward.blank_post, fsr_cfg)
    grads = backward(params, forward, lattice_grad, fsr_cfg.ctc_weight * ctc_logit_grad)
    return UtteranceLoss(
        transducer=tr,
        ctc=ctc,
        surrogate=surrogate,
        joint=joint,
        grads=grads,
        joint_evals=forward.joint_evals,
    )


def batch_loss_and_grads(
    params: TinyTransducer, batch: Sequence[Utterance], fsr_cfg: FsrConfig
) -> Tuple[Tuple[float, float, float, float], Gradients]:
    """Mean losses ``(transducer, ctc, surrogate, joint)`` and mean gradients."""
    if not batch:
        raise EmptyUtteranceError("Empty training batch")
    totals = np.zeros(4)
    grads = zero_grads(params)
    for utt in batch:
        result = loss_and_grads(params, utt, fsr_cfg)
        totals += (result.transducer, result.ctc, result.surrogate, result.joint)
        for name, g in result.grads.items():
            grads[name] += g
    n = len(batch)
    means = totals / n
    return (
        (float(means[0]), float(means[1]), float(means[2]), float(means[3])),
        {name: g / n for name, g in grads.items()},
    )


def global_norm(grads: Gradients) -> float:
    return math.sqrt(sum(float(np.sum(g * g)) for g in grads.values()))


def sgd_update(
    params: TinyTransducer, grads: Gradients, learning_rate: float, clip_norm: float
) -> Tuple[TinyTransducer, float]:
    """Return updated params and the pre-clipping gradient norm."""
    norm = global_norm(grads)
    scale = min(1.0, clip_norm / norm) if norm > 0.0 else 1.0
    updated = params.copy()
    for name, g in grads.items():
        updated.tensors[name] -= learning_rate * scale * g
    return updated, norm


def sample_batch(
    utterances: Sequence[Utterance], step: int, cfg: TrainConfig
) -> List[Utterance]:
    rng = np.random.default_rng([cfg.seed, step])
    indices = rng.integers(0, len(utterances), size=cfg.batch_size)
    return [utterances[int(i)] for i in indices]


@dataclass
class TrainResult:
    params: TinyTransducer
    records: List[StepRecord] = field(default_factory=list)

    @property
    def final_step(self) -> int:
        return self.records[-1].step if self.records else 0


CheckpointHook = Callable[[TinyTransducer, int], None]
StepHook = Callable[[StepRecord], None]


def train(
    params: TinyTransducer,
    utterances: Sequence[Utterance],
    fsr_cfg: FsrConfig,
    train_cfg: TrainConfig,
    start_step: int = 0,
    on_checkpoint: Optional[CheckpointHook] = None,
    on_step: Optional[StepHook] = None,
) -> TrainResult:
    """Run SGD from ``start_step`` up to ``train_cfg.max_steps``.

    ``on_step(record)`` sees every step record as it is produced;
    ``on_checkpoint(params, step)`` is called every ``checkpoint_every`` steps
    and after the last step. A non-finite loss or gradient raises
    :class:`TrainingDivergedError` without touching checkpoints already written.
    """
    if not utterances:
        raise EmptyUtteranceError("Training set is empty")

    metrics = get_metrics()
    result = TrainResult(params=params)
    last: Optional[StepRecord] = None

    for step in range(start_step, train_cfg.max_steps):
        batch = sample_batch(utterances, step, train_cfg)
        try:
            losses, grads = batch_loss_and_grads(result.params, batch, fsr_cfg)
        except NonFiniteLossError as e:
            raise TrainingDivergedError(
                step + 1,
                f"Non-finite loss at step {step + 1}: {e.message}",
                last_record=last.to_dict() if last else None,
            )
        new_params, norm = sgd_update(
            result.params, grads, train_cfg.learning_rate, train_cfg.clip_norm
        )
        if not math.isfinite(norm) or not new_params.is_finite():
            raise TrainingDivergedError(
                step + 1,
                f"Non-finite gradient at step {step + 1}",
                last_record=last.to_dict() if last else None,
            )

        result.params = new_params
        last = StepRecord(step + 1, *losses, grad_norm=norm)
        result.records.append(last)
        metrics.record_train_step(last.joint_loss)
        if on_step is not None:
            on_step(last)

        if last.step % train_cfg.log_every == 0:
            logger.info("train_step", extra=last.to_dict())
        if on_checkpoint is not None and last.step % train_cfg.checkpoint_every == 0:
            on_checkpoint(result.params, last.step)

    if on_checkpoint is not None and last is not None:
        if last.step % train_cfg.checkpoint_every != 0:
            on_checkpoint(result.params, last.step)
    return result


def write_training_log(
    records: Sequence[StepRecord], path: str | Path, append: bool = False
) -> Path:
    """Per-step CSV with :data:`LOG_COLUMNS`; appending keeps a single header."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    write_header = not (append and path.exists() and path.stat().st_size > 0)
    with path.open("a" if append else "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        if write_header:
            writer.writerow(LOG_COLUMNS)
        for rec in records:
            writer.writerow(
                [
                    rec.step,
                    repr(rec.transducer_loss),
                    repr(rec.ctc_loss),
                    repr(rec.fsr_surrogate),
                    repr(rec.joint_loss),
                    repr(rec.grad_norm),
                ]
            )
    return path


def read_training_log(path: str | Path) -> List[StepRecord]:
    with Path(path).open(newline="", encoding="utf-8") as fh:
        return [
            StepRecord(
                step=int(row["step"]),
                transducer_loss=float(row["transducer_loss"]),
                ctc_loss=float(row["ctc_loss"]),
                fsr_surrogate=float(row["fsr_surrogate"]),
                joint_loss=float(row["joint_loss"]),
                grad_norm=float(row["grad_norm"]),
            )
            for row in csv.DictReader(fh)
        ]


def moving_average(values: Sequence[float], window: int) -> np.ndarray:
    """Trailing mean over ``window`` entries; empty when fewer values exist."""
    x = np.asarray(values, dtype=np.float64)
    if window < 1 or x.shape[0] < window:
        return np.zeros(0)
    kernel = np.ones(window) / window
    return np.convolve(x, kernel, mode="valid")
