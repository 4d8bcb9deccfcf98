"""Greedy transducer decoding and fast-skip inference.

Fast-skip consults the CTC head before the joint network: frames whose CTC
blank probability exceeds ``delta`` are consumed as blank without touching
the predictor or the joint. Each triggered frame also triggers ``w_left``
frames to its left and ``w_right`` frames to its right, so a transducer
emission that lands a frame or two off the CTC spike is still decoded.

With ``delta = 1`` (or an all-true mask) fast-skip is greedy decoding.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from fastskip.utils.exceptions import EmptyUtteranceError, LatticeShapeError

from .config import SkipConfig
from .losses import BLANK_ID, BlankPosterior
from .model import START_ID, EncodedUtterance, TinyTransducer, joint_step, predict_step
from .telemetry import get_metrics

# Emissions landing on frames at or below this CTC blank probability count
# as agreeing with a CTC spike.
SPIKE_THRESHOLD = 0.5


@dataclass
class DecodeTrace:
    """Output and operation counters of one decode.

    ``tokens`` holds ``(token_id, frame)`` with 1-based frames;
    ``blank_transitions`` counts frame advances, skipped frames included;
    ``pred_calls`` never exceeds ``joint_calls``.
    """

    tokens: List[Tuple[int, int]]
    triggered: np.ndarray
    joint_calls: int = 0
    pred_calls: int = 0
    wall_nanos: int = 0
    blank_transitions: int = 0

    @property
    def token_ids(self) -> List[int]:
        return [token for token, _ in self.tokens]

    @property
    def num_frames(self) -> int:
        return int(self.triggered.shape[0])

    @property
    def triggered_count(self) -> int:
        return int(np.count_nonzero(self.triggered))

    @property
    def skipped_count(self) -> int:
        return self.num_frames - self.triggered_count

    def emissions_at(self, frame: int) -> List[int]:
        return [token for token, f in self.tokens if f == frame]


def trigger_mask(cb: BlankPosterior | np.ndarray, cfg: SkipConfig) -> np.ndarray:
    """Frames the decoder must evaluate.

    ``base[t] = cb[t] <= delta``; the result is ``base`` dilated by
    ``w_left`` frames leftwards and ``w_right`` frames rightwards.
    """
    probs = cb.cb if isinstance(cb, BlankPosterior) else np.asarray(cb, dtype=float)
    base = probs <= cfg.delta
    expanded = base.copy()
    for d in range(1, cfg.w_left + 1):
        expanded[:-d] |= base[d:]
    for d in range(1, cfg.w_right + 1):
        expanded[d:] |= base[:-d]
    return expanded


def _decode(
    params: TinyTransducer,
    encoded: EncodedUtterance,
    mask: np.ndarray,
    max_symbols: int,
) -> DecodeTrace:
    T = encoded.num_frames
    if T < 1:
        raise EmptyUtteranceError("Encoded utterance has no frames")
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != (T,):
        raise LatticeShapeError(
            "trigger mask length must equal T'", expected=(T,), actual=mask.shape
        )

    start = time.perf_counter_ns()
    trace = DecodeTrace(tokens=[], triggered=mask.copy())
    pred_state: Optional[np.ndarray] = None
    prev_token = START_ID

    for t in range(T):
        if not mask[t]:
            trace.blank_transitions += 1
            continue
        enc_t = encoded.enc_states[t]
        emitted = 0
        while emitted < max_symbols:
            # Predictor state is refreshed only when a joint call consumes it.
            if pred_state is None:
                pred_state = predict_step(params, prev_token)
                trace.pred_calls += 1
            logprobs = joint_step(params, enc_t, pred_state)
            trace.joint_calls += 1
            best = int(np.argmax(logprobs))
            if best == BLANK_ID:
                break
            trace.tokens.append((best, t + 1))
            emitted += 1
            prev_token = best
            pred_state = None
        trace.blank_transitions += 1

    trace.wall_nanos = time.perf_counter_ns() - start
    return trace


def _publish(mode: str, trace: DecodeTrace) -> DecodeTrace:
    get_metrics().record_trace(
        mode, trace.joint_calls, trace.triggered_count, trace.skipped_count
    )
    return trace


def greedy_decode(
    params: TinyTransducer, encoded: EncodedUtterance, cfg: SkipConfig = SkipConfig()
) -> DecodeTrace:
    """Frame-synchronous greedy search; only ``cfg.max_symbols_per_frame`` is used."""
    mask = np.ones(encoded.num_frames, dtype=bool)
    return _publish("greedy", _decode(params, encoded, mask, cfg.max_symbols_per_frame))


def fast_skip_decode(
    params: TinyTransducer,
    encoded: EncodedUtterance,
    cfg: SkipConfig = SkipConfig(),
    mask: Optional[np.ndarray] = None,
) -> DecodeTrace:
    """Greedy search restricted to frames of :func:`trigger_mask` (or ``mask``)."""
    if mask is None:
        mask = trigger_mask(encoded.blank_posterior(), cfg)
    return _publish(
        "fastskip", _decode(params, encoded, mask, cfg.max_symbols_per_frame)
    )


# ── Alignment export ─────────────────────────────────────────────────────


@dataclass(frozen=True)
class AlignmentRecord:
    frame: int
    cb: float
    triggered: bool
    tokens: Tuple[int, ...]

    def to_line(self) -> str:
        joined = ",".join(str(t) for t in self.tokens)
        return f"{self.frame}\t{self.cb:.6f}\t{int(self.triggered)}\t{joined}"


@dataclass
class AlignmentReport:
    records: List[AlignmentRecord] = field(default_factory=list)
    agreement: Optional[float] = None
    emissions: int = 0

    HEADER = "frame\tcb\ttriggered\ttokens"

    def to_lines(self) -> List[str]:
        return [self.HEADER] + [r.to_line() for r in self.records]


def format_agreement(value: Optional[float]) -> str:
    return "n/a" if value is None else f"{value:.6f}"


def extract_alignment(
    trace: DecodeTrace,
    cb: BlankPosterior | Sequence[float],
    spike_threshold: float = SPIKE_THRESHOLD,
) -> AlignmentReport:
    """Per-frame records plus the share of emissions landing on CTC spikes."""
    probs = cb.cb if isinstance(cb, BlankPosterior) else np.asarray(cb, dtype=float)
    if probs.shape[0] != trace.num_frames:
        raise LatticeShapeError(
            "blank posterior length must equal the trace length",
            expected=(trace.num_frames,),
            actual=(probs.shape[0],),
        )

    by_frame: List[List[int]] = [[] for _ in range(trace.num_frames)]
    for token, frame in trace.tokens:
        by_frame[frame - 1].append(token)

    records = [
        AlignmentRecord(
            frame=t + 1,
            cb=float(probs[t]),
            triggered=bool(trace.triggered[t]),
            tokens=tuple(by_frame[t]),
        )
        for t in range(trace.num_frames)
    ]
    n = len(trace.tokens)
    agreement = None
    if n:
        on_spike = sum(1 for _, frame in trace.tokens if probs[frame - 1] <= spike_threshold)
        agreement = on_spike / n
    return AlignmentReport(records=records, agreement=agreement, emissions=n)
