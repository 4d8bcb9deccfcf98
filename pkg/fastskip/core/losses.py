"""Transducer loss, fast-skip regularized gradients, CTC and the joint objective.

The regularizer is defined by its gradient rule. For a move out of node
(t, u) the classic transducer gradient w.r.t. the move's linear probability is
``-alpha(t, u) * beta(next) / P(y|x)``; fast-skip regularization scales label
moves by ``1 + lambda * C_t^nb`` and blank moves by ``1 + lambda * C_t^b``,
where ``C_t^b`` is the CTC head's blank probability at frame t. The CTC head
receives no gradient from this term.

``fsr_surrogate`` is the scalar logged next to the losses; it sums the
CTC-weighted move posteriors over every node and is monitoring only.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence, Tuple

import numpy as np

from fastskip.utils.exceptions import (
    CtcInfeasibleError,
    LatticeShapeError,
    NonFiniteLossError,
)

from .config import FsrConfig
from .lattice import Lattice, sequence_logprob, transition_scores
from .logspace import NEG_INF

BLANK_ID = 0


@dataclass(frozen=True)
class BlankPosterior:
    """Per-frame CTC blank probability ``cb`` and its complement ``cnb``."""

    cb: np.ndarray

    @classmethod
    def from_ctc_logprobs(
        cls, ctc_logprobs: np.ndarray, blank_id: int = BLANK_ID
    ) -> "BlankPosterior":
        return cls(cb=np.exp(np.asarray(ctc_logprobs)[:, blank_id]))

    @property
    def cnb(self) -> np.ndarray:
        return 1.0 - self.cb

    def __len__(self) -> int:
        return int(self.cb.shape[0])


@dataclass(frozen=True)
class LatticeGrad:
    """Gradients w.r.t. linear move probabilities.

    ``d_blank`` is ``(T, U+1)``; ``d_label`` is ``(T, U)`` and refers to
    emitting ``y_{u+1}``. Row ``t-1`` holds frame t.
    """

    d_blank: np.ndarray
    d_label: np.ndarray

    @classmethod
    def zeros(cls, T: int, U: int) -> "LatticeGrad":
        return cls(d_blank=np.zeros((T, U + 1)), d_label=np.zeros((T, U)))


def transducer_loss(lattice: Lattice) -> float:
    """-ln P(y|x)."""
    return -sequence_logprob(lattice)


def transducer_lattice_grads(lattice: Lattice) -> LatticeGrad:
    """Classic transducer gradients (no regularization)."""
    logp = sequence_logprob(lattice)
    blank_scores, label_scores = transition_scores(lattice)
    d_blank = -np.exp(blank_scores - logp)
    d_label = -np.exp(label_scores[:, : lattice.U] - logp)
    return LatticeGrad(d_blank=d_blank, d_label=d_label)


def fsr_lattice_grads(
    lattice: Lattice, blank_post: BlankPosterior, cfg: FsrConfig
) -> LatticeGrad:
    """Classic gradients scaled per frame by ``1 + lambda * C_t``."""
    if len(blank_post) != lattice.T:
        raise LatticeShapeError(
            "blank posterior length must equal T",
            expected=(lattice.T,),
            actual=(len(blank_post),),
        )
    classic = transducer_lattice_grads(lattice)
    blank_scale = 1.0 + cfg.fsr_lambda * blank_post.cb
    label_scale = 1.0 + cfg.fsr_lambda * blank_post.cnb
    return LatticeGrad(
        d_blank=classic.d_blank * blank_scale[:, None],
        d_label=classic.d_label * label_scale[:, None],
    )


def fsr_surrogate(lattice: Lattice, blank_post: BlankPosterior) -> float:
    """Σ over nodes of cnb(t)·P(label move) + cb(t)·P(blank move), normalized by P(y|x)."""
    logp = sequence_logprob(lattice)
    U = lattice.U
    blank_scores, label_scores = transition_scores(lattice)
    probs = lattice.node_probs
    blank_post_lp = blank_scores + probs.blank_lp - logp
    label_post_lp = label_scores[:, :U] + probs.label_lp - logp
    blank_term = np.sum(blank_post.cb[:, None] * np.exp(blank_post_lp))
    label_term = np.sum(blank_post.cnb[:, None] * np.exp(label_post_lp))
    return float(blank_term + label_term)


def chain_to_logits(
    lattice_grad: LatticeGrad,
    node_logprobs: np.ndarray,
    targets: Sequence[int],
    blank_id: int = BLANK_ID,
) -> np.ndarray:
    """Push move-probability gradients through the per-node softmax.

    ``node_logprobs`` is ``(T, U+1, V+1)``. With g the gradient w.r.t.
    probabilities, ``dL/dz_k = g_k p_k - p_k Σ_j g_j p_j``; only the blank and
    the next target label carry nonzero g.
    """
    probs = np.exp(node_logprobs)
    T, U1, _ = probs.shape
    U = U1 - 1
    targets = np.asarray(targets, dtype=np.int64)

    g_blank = lattice_grad.d_blank * probs[:, :, blank_id]
    g_label = np.zeros((T, U1))
    if U > 0:
        next_label_p = probs[:, np.arange(U), targets]
        g_label[:, :U] = lattice_grad.d_label * next_label_p

    grad = -probs * (g_blank + g_label)[:, :, None]
    grad[:, :, blank_id] += g_blank
    if U > 0:
        rows = np.arange(T)[:, None]
        cols = np.arange(U)[None, :]
        grad[rows, cols, targets[None, :]] += g_label[:, :U]
    return grad


def ctc_min_frames(targets: Sequence[int]) -> int:
    """Frames needed to align ``targets``: one per label plus one per adjacent repeat."""
    y = list(targets)
    repeats = sum(1 for a, b in zip(y, y[1:]) if a == b)
    return len(y) + repeats


def _extended(targets: Sequence[int], blank_id: int) -> Tuple[np.ndarray, np.ndarray]:
    """Blank-interleaved label sequence and the mask of states reachable by a skip."""
    z = np.full(2 * len(targets) + 1, blank_id, dtype=np.int64)
    z[1::2] = np.asarray(targets, dtype=np.int64)
    skip_ok = np.zeros(z.shape[0], dtype=bool)
    if z.shape[0] > 2:
        skip_ok[2:] = (z[2:] != blank_id) & (z[2:] != z[:-2])
    return z, skip_ok


def _ctc_alpha_beta(
    ctc_logprobs: np.ndarray, targets: Sequence[int], blank_id: int
) -> Tuple[np.ndarray, np.ndarray, np.ndarray, float]:
    lp = np.asarray(ctc_logprobs, dtype=np.float64)
    n_frames = lp.shape[0]
    required = ctc_min_frames(targets)
    if n_frames < max(required, 1):
        raise CtcInfeasibleError(frames=n_frames, required=max(required, 1))

    z, skip_ok = _extended(targets, blank_id)
    S = z.shape[0]
    emit = lp[:, z]  # (T', S)

    alpha = np.full((n_frames, S), NEG_INF)
    alpha[0, 0] = emit[0, 0]
    if S > 1:
        alpha[0, 1] = emit[0, 1]
    for t in range(1, n_frames):
        prev = alpha[t - 1]
        one = np.concatenate(([NEG_INF], prev[:-1]))
        two = np.concatenate(([NEG_INF, NEG_INF], prev[:-2]))[:S]
        two = np.where(skip_ok, two, NEG_INF)
        alpha[t] = np.logaddexp(np.logaddexp(prev, one), two) + emit[t]

    beta = np.full((n_frames, S), NEG_INF)
    beta[-1, S - 1] = emit[-1, S - 1]
    if S > 1:
        beta[-1, S - 2] = emit[-1, S - 2]
    skip_from = np.concatenate((skip_ok[2:], [False, False]))[:S]
    for t in range(n_frames - 2, -1, -1):
        nxt = beta[t + 1]
        one = np.concatenate((nxt[1:], [NEG_INF]))
        two = np.concatenate((nxt[2:], [NEG_INF, NEG_INF]))[:S]
        two = np.where(skip_from, two, NEG_INF)
        beta[t] = np.logaddexp(np.logaddexp(nxt, one), two) + emit[t]

    if S > 1:
        logp = float(np.logaddexp(alpha[-1, S - 1], alpha[-1, S - 2]))
    else:
        logp = float(alpha[-1, 0])
    return z, alpha, beta, logp


def ctc_forward(
    ctc_frame_logprobs: np.ndarray, targets: Sequence[int], blank_id: int = BLANK_ID
) -> float:
    """ln P_CTC(y|x) over the blank-interleaved extended label sequence."""
    _, _, _, logp = _ctc_alpha_beta(ctc_frame_logprobs, targets, blank_id)
    return logp


def ctc_loss_and_grad(
    ctc_frame_logprobs: np.ndarray, targets: Sequence[int], blank_id: int = BLANK_ID
) -> Tuple[float, np.ndarray]:
    """-ln P_CTC and its gradient w.r.t. the pre-softmax frame logits."""
    lp = np.asarray(ctc_frame_logprobs, dtype=np.float64)
    z, alpha, beta, logp = _ctc_alpha_beta(lp, targets, blank_id)
    # alpha and beta both include the frame's own emission; remove one copy.
    state_post = np.exp(alpha + beta - lp[:, z] - logp)
    occupancy = np.zeros_like(lp)
    np.add.at(occupancy.T, z, state_post.T)
    return -logp, np.exp(lp) - occupancy


def ctc_grad(
    ctc_frame_logprobs: np.ndarray, targets: Sequence[int], blank_id: int = BLANK_ID
) -> np.ndarray:
    """Gradient of -ctc_forward w.r.t. frame logits."""
    return ctc_loss_and_grad(ctc_frame_logprobs, targets, blank_id)[1]


def joint_loss(
    transducer_loss_value: float,
    ctc_loss_value: float,
    fsr_surrogate_value: float,
    cfg: FsrConfig,
) -> float:
    """ctc_weight·L_CTC + L_transducer + lambda·L_fsr (surrogate, reporting only)."""
    for name, value in (
        ("transducer", transducer_loss_value),
        ("ctc", ctc_loss_value),
        ("fsr_surrogate", fsr_surrogate_value),
    ):
        if not math.isfinite(value):
            raise NonFiniteLossError(name, value)
    return (
        cfg.ctc_weight * ctc_loss_value
        + transducer_loss_value
        + cfg.fsr_lambda * fsr_surrogate_value
    )
