"""Tiny transducer: encoder, stateless predictor, joint network and CTC head.

Everything is float64 numpy with hand-written reverse mode. Shapes, with
V the vocabulary size (ids 1..V, id 0 is blank / start), F the feature
size, k the context, H the hidden size::

    enc_w      (H, F*(2k+1))    enc_b   (H,)
    pred_embed (V+1, H)
    join_w_a   (H, H)           join_w_p (H, H)     join_b (H,)
    out_w      (V+1, H)         out_b   (V+1,)
    ctc_w      (V+1, H)         ctc_b   (V+1,)

The joint adds the projected encoder and predictor states before its tanh.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, Iterator, Sequence, Tuple

import numpy as np

from fastskip.utils.exceptions import (
    EmptyUtteranceError,
    LatticeShapeError,
    UnknownTokenError,
)

from .config import ModelConfig
from .lattice import Lattice, NodeProbs
from .logspace import log_softmax
from .losses import BLANK_ID, BlankPosterior, LatticeGrad, chain_to_logits

START_ID = BLANK_ID

PARAM_NAMES: Tuple[str, ...] = (
    "enc_w",
    "enc_b",
    "pred_embed",
    "join_w_a",
    "join_w_p",
    "join_b",
    "out_w",
    "out_b",
    "ctc_w",
    "ctc_b",
)

Gradients = Dict[str, np.ndarray]


def param_shapes(cfg: ModelConfig) -> Dict[str, Tuple[int, ...]]:
    H, V1, D = cfg.hidden_size, cfg.output_size, cfg.stacked_dim
    return {
        "enc_w": (H, D),
        "enc_b": (H,),
        "pred_embed": (V1, H),
        "join_w_a": (H, H),
        "join_w_p": (H, H),
        "join_b": (H,),
        "out_w": (V1, H),
        "out_b": (V1,),
        "ctc_w": (V1, H),
        "ctc_b": (V1,),
    }


def _fan_in(name: str, shape: Tuple[int, ...]) -> int:
    # Embedding rows are selected by a one-hot input.
    if name == "pred_embed":
        return 1
    return shape[1]


@dataclass
class TinyTransducer:
    """Parameter tensors of the model, keyed by :data:`PARAM_NAMES`."""

    config: ModelConfig
    tensors: Dict[str, np.ndarray] = field(default_factory=dict)

    def __post_init__(self) -> None:
        expected = param_shapes(self.config)
        if set(self.tensors) != set(expected):
            missing = sorted(set(expected) - set(self.tensors))
            raise LatticeShapeError(f"Missing parameter tensors: {missing}")
        for name, shape in expected.items():
            actual = tuple(np.shape(self.tensors[name]))
            if actual != shape:
                raise LatticeShapeError(
                    f"Parameter {name} has the wrong shape",
                    expected=shape,
                    actual=actual,
                )
            self.tensors[name] = np.asarray(self.tensors[name], dtype=np.float64)

    @classmethod
    def init(cls, cfg: ModelConfig) -> "TinyTransducer":
        """Weights uniform in ±1/sqrt(fan_in) from ``cfg.init_seed``; biases zero."""
        rng = np.random.default_rng(cfg.init_seed)
        tensors: Dict[str, np.ndarray] = {}
        for name, shape in param_shapes(cfg).items():
            if len(shape) == 1:
                tensors[name] = np.zeros(shape)
            else:
                scale = 1.0 / np.sqrt(_fan_in(name, shape))
                tensors[name] = rng.uniform(-scale, scale, size=shape)
        return cls(config=cfg, tensors=tensors)

    @classmethod
    def zeros(cls, cfg: ModelConfig) -> "TinyTransducer":
        return cls(
            config=cfg,
            tensors={n: np.zeros(s) for n, s in param_shapes(cfg).items()},
        )

    def __getattr__(self, name: str) -> np.ndarray:
        tensors = self.__dict__.get("tensors", {})
        if name in tensors:
            return tensors[name]
        raise AttributeError(name)

    def items(self) -> Iterator[Tuple[str, np.ndarray]]:
        for name in PARAM_NAMES:
            yield name, self.tensors[name]

    def copy(self) -> "TinyTransducer":
        return TinyTransducer(
            config=self.config,
            tensors={n: t.copy() for n, t in self.tensors.items()},
        )

    def is_finite(self) -> bool:
        return all(np.all(np.isfinite(t)) for t in self.tensors.values())

    def num_parameters(self) -> int:
        return int(sum(t.size for t in self.tensors.values()))


def zero_grads(params: TinyTransducer) -> Gradients:
    return {name: np.zeros_like(t) for name, t in params.items()}


# ── Encoder ──────────────────────────────────────────────────────────────


@dataclass(frozen=True)
class EncodedUtterance:
    """Encoder output on the subsampled frame rate.

    ``enc_states`` is ``(T', H)``, ``ctc_logprobs`` is ``(T', V+1)``;
    ``stacked`` keeps the encoder input for the backward pass.
    """

    enc_states: np.ndarray
    ctc_logprobs: np.ndarray
    subsample_factor: int
    stacked: np.ndarray
    num_raw_frames: int

    @property
    def num_frames(self) -> int:
        return int(self.enc_states.shape[0])

    def blank_posterior(self) -> BlankPosterior:
        return BlankPosterior.from_ctc_logprobs(self.ctc_logprobs)


def stack_frames(features: np.ndarray, context: int, subsample: int) -> np.ndarray:
    """Concatenate each frame with ``context`` zero-padded neighbours per side, then stride."""
    T = features.shape[0]
    padded = np.pad(features, ((context, context), (0, 0)))
    windows = [padded[i : i + T] for i in range(2 * context + 1)]
    return np.concatenate(windows, axis=1)[::subsample]


def encode(params: TinyTransducer, features: np.ndarray) -> EncodedUtterance:
    cfg = params.config
    x = np.asarray(features, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != cfg.feat_dim:
        raise LatticeShapeError(
            "features must be (T, feat_dim)",
            expected=(None, cfg.feat_dim),
            actual=tuple(x.shape),
        )
    if x.shape[0] == 0:
        raise EmptyUtteranceError()

    stacked = stack_frames(x, cfg.context, cfg.subsample)
    enc_states = np.tanh(stacked @ params.enc_w.T + params.enc_b)
    ctc_logits = enc_states @ params.ctc_w.T + params.ctc_b
    return EncodedUtterance(
        enc_states=enc_states,
        ctc_logprobs=log_softmax(ctc_logits),
        subsample_factor=cfg.subsample,
        stacked=stacked,
        num_raw_frames=int(x.shape[0]),
    )


# ── Predictor and joint ──────────────────────────────────────────────────


def _check_token(token: int, vocab_size: int) -> int:
    token = int(token)
    if not 0 <= token <= vocab_size:
        raise UnknownTokenError(token, vocab_size)
    return token


def predict_step(params: TinyTransducer, prev_token: int) -> np.ndarray:
    """Predictor output for the previous token (``START_ID`` at u=0)."""
    token = _check_token(prev_token, params.config.vocab_size)
    return params.pred_embed[token].copy()


def joint_step(
    params: TinyTransducer, enc_state: np.ndarray, pred_state: np.ndarray
) -> np.ndarray:
    """``(V+1,)`` log-softmax row for one encoder frame and predictor state."""
    hidden = np.tanh(
        params.join_w_a @ enc_state + params.join_w_p @ pred_state + params.join_b
    )
    return log_softmax(params.out_w @ hidden + params.out_b)


def joint_grid(
    params: TinyTransducer, enc_states: np.ndarray, pred_states: np.ndarray
) -> Tuple[np.ndarray, np.ndarray]:
    """Joint over every (frame, predictor state) pair.

    Returns ``(hidden, logprobs)`` shaped ``(T', U+1, H)`` and ``(T', U+1, V+1)``.
    """
    enc_proj = enc_states @ params.join_w_a.T
    pred_proj = pred_states @ params.join_w_p.T
    hidden = np.tanh(enc_proj[:, None, :] + pred_proj[None, :, :] + params.join_b)
    return hidden, log_softmax(hidden @ params.out_w.T + params.out_b)


# ── Full-lattice forward and backward ────────────────────────────────────


@dataclass(frozen=True)
class TransducerForward:
    """Everything the backward pass needs from one utterance's forward pass."""

    encoded: EncodedUtterance
    targets: np.ndarray
    pred_inputs: np.ndarray
    pred_states: np.ndarray
    joint_hidden: np.ndarray
    joint_logprobs: np.ndarray
    node_probs: NodeProbs
    blank_post: BlankPosterior

    @property
    def joint_evals(self) -> int:
        """Joint network evaluations spent on this lattice: T' * (U+1)."""
        return int(self.joint_logprobs.shape[0] * self.joint_logprobs.shape[1])

    def lattice(self) -> Lattice:
        return Lattice.build(self.node_probs)


def build_lattice(
    params: TinyTransducer, features: np.ndarray, targets: Sequence[int]
) -> TransducerForward:
    """Encode, run the joint on every lattice node and collect node probabilities."""
    vocab_size = params.config.vocab_size
    y = np.asarray([int(t) for t in targets], dtype=np.int64)
    for token in y:
        if not 1 <= token <= vocab_size:
            raise UnknownTokenError(int(token), vocab_size)

    encoded = encode(params, features)
    pred_inputs = np.concatenate(([START_ID], y)).astype(np.int64)
    pred_states = params.pred_embed[pred_inputs]
    hidden, logprobs = joint_grid(params, encoded.enc_states, pred_states)

    U = y.shape[0]
    blank_lp = logprobs[:, :, BLANK_ID]
    label_lp = logprobs[:, np.arange(U), y] if U else np.zeros((logprobs.shape[0], 0))
    return TransducerForward(
        encoded=encoded,
        targets=y,
        pred_inputs=pred_inputs,
        pred_states=pred_states,
        joint_hidden=hidden,
        joint_logprobs=logprobs,
        node_probs=NodeProbs.from_arrays(blank_lp, label_lp),
        blank_post=encoded.blank_posterior(),
    )


def backward(
    params: TinyTransducer,
    forward: TransducerForward,
    lattice_grad: LatticeGrad,
    ctc_grad: np.ndarray,
) -> Gradients:
    """Parameter gradients from lattice move gradients and CTC logit gradients.

    ``ctc_grad`` must already carry the CTC weight of the objective.
    """
    enc = forward.encoded
    T, U1 = forward.joint_logprobs.shape[:2]
    if lattice_grad.d_blank.shape != (T, U1):
        raise LatticeShapeError(
            "lattice gradient does not match the forward pass",
            expected=(T, U1),
            actual=tuple(lattice_grad.d_blank.shape),
        )
    ctc_grad = np.asarray(ctc_grad, dtype=np.float64)
    if ctc_grad.shape != enc.ctc_logprobs.shape:
        raise LatticeShapeError(
            "ctc gradient does not match the CTC head output",
            expected=tuple(enc.ctc_logprobs.shape),
            actual=tuple(ctc_grad.shape),
        )

    grads: Gradients = {}
    d_logits = chain_to_logits(lattice_grad, forward.joint_logprobs, forward.targets)
    hidden = forward.joint_hidden

    grads["out_w"] = np.einsum("tuv,tuh->vh", d_logits, hidden)
    grads["out_b"] = d_logits.sum(axis=(0, 1))

    d_pre = (d_logits @ params.out_w) * (1.0 - hidden**2)
    grads["join_b"] = d_pre.sum(axis=(0, 1))
    d_enc_proj = d_pre.sum(axis=1)
    d_pred_proj = d_pre.sum(axis=0)

    grads["join_w_a"] = d_enc_proj.T @ enc.enc_states
    grads["join_w_p"] = d_pred_proj.T @ forward.pred_states

    d_pred_states = d_pred_proj @ params.join_w_p
    d_embed = np.zeros_like(params.pred_embed)
    np.add.at(d_embed, forward.pred_inputs, d_pred_states)
    grads["pred_embed"] = d_embed

    grads["ctc_w"] = ctc_grad.T @ enc.enc_states
    grads["ctc_b"] = ctc_grad.sum(axis=0)

    d_enc = d_enc_proj @ params.join_w_a + ctc_grad @ params.ctc_w
    d_enc_pre = d_enc * (1.0 - enc.enc_states**2)
    grads["enc_w"] = d_enc_pre.T @ enc.stacked
    grads["enc_b"] = d_enc_pre.sum(axis=0)

    return {name: grads[name] for name in PARAM_NAMES}
