"""Character error rate, decode cost counters and corpus aggregation."""

from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Dict, List, NamedTuple, Optional, Sequence

from fastskip.utils.exceptions import EmptyUtteranceError, UndefinedCerError

# Nominal frame shift of the synthetic features, used for the RTF proxy.
FRAME_SHIFT_SECONDS = 0.01

REPORT_COLUMNS = (
    "mode",
    "utterances",
    "cer",
    "errors",
    "ref_tokens",
    "rtf_proxy",
    "joint_calls_total",
    "pred_calls_total",
    "skip_ratio",
    "agreement",
    "blank_fraction",
    "triggered_frames",
    "total_frames",
)


class EditCounts(NamedTuple):
    substitutions: int
    deletions: int
    insertions: int

    @property
    def total(self) -> int:
        return self.substitutions + self.deletions + self.insertions


def edit_distance(ref: Sequence[int], hyp: Sequence[int]) -> EditCounts:
    """Levenshtein alignment of ``hyp`` against ``ref`` split into S, D, I.

    Among minimal alignments the backtrace prefers a substitution, then a
    deletion, then an insertion.
    """
    r, h = list(ref), list(hyp)
    n, m = len(r), len(h)
    dist = [[0] * (m + 1) for _ in range(n + 1)]
    for i in range(1, n + 1):
        dist[i][0] = i
    for j in range(1, m + 1):
        dist[0][j] = j
    for i in range(1, n + 1):
        for j in range(1, m + 1):
            cost = 0 if r[i - 1] == h[j - 1] else 1
            dist[i][j] = min(
                dist[i - 1][j - 1] + cost,
                dist[i - 1][j] + 1,
                dist[i][j - 1] + 1,
            )

    s = d = ins = 0
    i, j = n, m
    while i > 0 or j > 0:
        if i > 0 and j > 0:
            cost = 0 if r[i - 1] == h[j - 1] else 1
            if dist[i][j] == dist[i - 1][j - 1] + cost:
                s += cost
                i, j = i - 1, j - 1
                continue
        if i > 0 and dist[i][j] == dist[i - 1][j] + 1:
            d += 1
            i -= 1
        else:
            ins += 1
            j -= 1
    return EditCounts(s, d, ins)


@dataclass(frozen=True)
class UtteranceResult:
    """Per-utterance evaluation row; one line of the per-utterance CSV."""

    id: str
    ref: tuple
    hyp: tuple
    edits: EditCounts
    joint_calls: int
    pred_calls: int
    wall_nanos: int
    raw_frames: int
    encoded_frames: int
    triggered_frames: int
    blank_transitions: int
    spike_emissions: int

    @property
    def emissions(self) -> int:
        return len(self.hyp)

    @property
    def agreement(self) -> Optional[float]:
        return self.spike_emissions / self.emissions if self.emissions else None


UTTERANCE_COLUMNS = (
    "id",
    "ref",
    "hyp",
    "substitutions",
    "deletions",
    "insertions",
    "joint_calls",
    "pred_calls",
    "wall_nanos",
    "raw_frames",
    "encoded_frames",
    "triggered_frames",
)


def utterance_row(result: UtteranceResult) -> List[str]:
    return [
        result.id,
        " ".join(str(t) for t in result.ref),
        " ".join(str(t) for t in result.hyp),
        str(result.edits.substitutions),
        str(result.edits.deletions),
        str(result.edits.insertions),
        str(result.joint_calls),
        str(result.pred_calls),
        str(result.wall_nanos),
        str(result.raw_frames),
        str(result.encoded_frames),
        str(result.triggered_frames),
    ]


@dataclass(frozen=True)
class EvalReport:
    mode: str
    utterances: int
    cer: float
    errors: int
    ref_tokens: int
    rtf_proxy: float
    joint_calls_total: int
    pred_calls_total: int
    skip_ratio: float
    agreement: Optional[float]
    blank_fraction: float
    triggered_frames: int
    total_frames: int

    def as_dict(self) -> Dict[str, object]:
        return asdict(self)

    def _render(self, key: str) -> str:
        value = getattr(self, key)
        if value is None:
            return "n/a"
        if isinstance(value, float):
            return f"{value:.6f}"
        return str(value)

    def to_kv(self) -> str:
        """Flat ``key=value`` text, one field per line."""
        return "".join(f"{key}={self._render(key)}\n" for key in REPORT_COLUMNS)

    def csv_row(self) -> List[str]:
        return [self._render(key) for key in REPORT_COLUMNS]


def aggregate(results: Sequence[UtteranceResult], mode: str) -> EvalReport:
    """Corpus totals; every sum is over integers so row order does not matter."""
    if not results:
        raise EmptyUtteranceError("Nothing to aggregate: evaluation set is empty")

    ref_tokens = sum(len(r.ref) for r in results)
    if ref_tokens == 0:
        raise UndefinedCerError()
    errors = sum(r.edits.total for r in results)

    wall_nanos = sum(r.wall_nanos for r in results)
    raw_frames = sum(r.raw_frames for r in results)
    total_frames = sum(r.encoded_frames for r in results)
    triggered = sum(r.triggered_frames for r in results)
    emissions = sum(r.emissions for r in results)
    spikes = sum(r.spike_emissions for r in results)
    blanks = sum(r.blank_transitions for r in results)

    speech_seconds = raw_frames * FRAME_SHIFT_SECONDS
    return EvalReport(
        mode=mode,
        utterances=len(results),
        cer=errors / ref_tokens,
        errors=errors,
        ref_tokens=ref_tokens,
        rtf_proxy=(wall_nanos * 1e-9) / speech_seconds if speech_seconds else 0.0,
        joint_calls_total=sum(r.joint_calls for r in results),
        pred_calls_total=sum(r.pred_calls for r in results),
        skip_ratio=1.0 - triggered / total_frames if total_frames else 0.0,
        agreement=spikes / emissions if emissions else None,
        blank_fraction=blanks / (blanks + emissions) if blanks + emissions else 0.0,
        triggered_frames=triggered,
        total_frames=total_frames,
    )
