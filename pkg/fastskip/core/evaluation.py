"""Decode a dataset and turn the traces into reports.

Encoding runs across ``threads`` workers, but decodes are serialized behind
one lock so that ``wall_nanos`` measures a single decode at a time.
"""

from __future__ import annotations

import csv
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, List, Optional, Sequence, Tuple

from fastskip.utils.atomic import atomic_write_bytes
from fastskip.utils.exceptions import ConfigurationError, EmptyUtteranceError

from .config import SkipConfig
from .data import Utterance
from .decoder import (
    SPIKE_THRESHOLD,
    AlignmentReport,
    DecodeTrace,
    extract_alignment,
    fast_skip_decode,
    format_agreement,
    greedy_decode,
)
from .logging import get_logger
from .metrics import (
    UTTERANCE_COLUMNS,
    EvalReport,
    UtteranceResult,
    aggregate,
    edit_distance,
    utterance_row,
)
from .model import EncodedUtterance, TinyTransducer, encode
from .telemetry import get_metrics

logger = get_logger("fastskip.evaluation")

MODES = ("greedy", "fastskip")


def decode(
    params: TinyTransducer, encoded: EncodedUtterance, cfg: SkipConfig, mode: str
) -> DecodeTrace:
    if mode == "greedy":
        return greedy_decode(params, encoded, cfg)
    if mode == "fastskip":
        return fast_skip_decode(params, encoded, cfg)
    raise ConfigurationError(f"Unknown decode mode: {mode}", config_key="mode")


@dataclass(frozen=True)
class DecodedUtterance:
    utterance: Utterance
    encoded: EncodedUtterance
    trace: DecodeTrace


def decode_all(
    params: TinyTransducer,
    utterances: Sequence[Utterance],
    cfg: SkipConfig,
    mode: str,
    threads: int = 1,
) -> List[DecodedUtterance]:
    """Decode in input order; results do not depend on ``threads``."""
    if not utterances:
        raise EmptyUtteranceError("Evaluation set is empty")
    if mode not in MODES:
        raise ConfigurationError(f"Unknown decode mode: {mode}", config_key="mode")

    metrics = get_metrics()
    timing_lock = threading.Lock()

    def run(utt: Utterance) -> DecodedUtterance:
        encoded = encode(params, utt.features)
        with timing_lock, metrics.track_decode(mode):
            trace = decode(params, encoded, cfg, mode)
        return DecodedUtterance(utterance=utt, encoded=encoded, trace=trace)

    if threads <= 1:
        return [run(u) for u in utterances]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(run, utterances))


def utterance_result(decoded: DecodedUtterance) -> UtteranceResult:
    utt, trace = decoded.utterance, decoded.trace
    cb = decoded.encoded.blank_posterior().cb
    ref = tuple(int(t) for t in utt.targets)
    hyp = tuple(trace.token_ids)
    return UtteranceResult(
        id=utt.id,
        ref=ref,
        hyp=hyp,
        edits=edit_distance(ref, hyp),
        joint_calls=trace.joint_calls,
        pred_calls=trace.pred_calls,
        wall_nanos=trace.wall_nanos,
        raw_frames=decoded.encoded.num_raw_frames,
        encoded_frames=trace.num_frames,
        triggered_frames=trace.triggered_count,
        blank_transitions=trace.blank_transitions,
        spike_emissions=sum(
            1 for _, frame in trace.tokens if cb[frame - 1] <= SPIKE_THRESHOLD
        ),
    )


def evaluate(
    params: TinyTransducer,
    utterances: Sequence[Utterance],
    cfg: SkipConfig,
    mode: str,
    threads: int = 1,
) -> Tuple[EvalReport, List[UtteranceResult]]:
    decoded = decode_all(params, utterances, cfg, mode, threads=threads)
    results = [utterance_result(d) for d in decoded]
    report = aggregate(results, mode)
    logger.info(
        "evaluation",
        extra={
            "mode": mode,
            "utterances": report.utterances,
            "cer": report.cer,
            "joint_calls_total": report.joint_calls_total,
            "skip_ratio": report.skip_ratio,
        },
    )
    return report, results


def align(
    params: TinyTransducer,
    utterances: Sequence[Utterance],
    cfg: SkipConfig,
    mode: str,
    threads: int = 1,
) -> List[Tuple[str, AlignmentReport]]:
    decoded = decode_all(params, utterances, cfg, mode, threads=threads)
    return [
        (d.utterance.id, extract_alignment(d.trace, d.encoded.blank_posterior()))
        for d in decoded
    ]


def mean_agreement(reports: Iterable[AlignmentReport]) -> Optional[float]:
    """Mean of per-utterance agreement, skipping utterances with no emissions."""
    values = [r.agreement for r in reports if r.agreement is not None]
    return sum(values) / len(values) if values else None


# ── Writers ──────────────────────────────────────────────────────────────


def write_report(report: EvalReport, path: str | Path) -> Path:
    return atomic_write_bytes(path, report.to_kv().encode("utf-8"))


def write_utterance_csv(results: Sequence[UtteranceResult], path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(UTTERANCE_COLUMNS)
        for result in results:
            writer.writerow(utterance_row(result))
    return path


def write_alignments(
    alignments: Sequence[Tuple[str, AlignmentReport]], out_dir: str | Path
) -> Path:
    """One ``<id>.tsv`` per utterance plus ``summary.txt`` with the agreement footer."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    for utt_id, report in alignments:
        lines = report.to_lines()
        lines.append(f"# agreement={format_agreement(report.agreement)}")
        text = "\n".join(lines) + "\n"
        atomic_write_bytes(out_dir / f"{utt_id}.tsv", text.encode("utf-8"))

    summary = [
        f"{utt_id}\temissions={r.emissions}\tagreement={format_agreement(r.agreement)}"
        for utt_id, r in alignments
    ]
    overall = mean_agreement(r for _, r in alignments)
    summary.append(f"# mean_agreement={format_agreement(overall)}")
    text = "\n".join(summary) + "\n"
    return atomic_write_bytes(out_dir / "summary.txt", text.encode("utf-8"))
