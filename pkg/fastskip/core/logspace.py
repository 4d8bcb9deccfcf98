"""Numerically guarded log-domain arithmetic.

Every probability in the lattice, loss and decoder code lives in natural-log
space. ``-inf`` encodes probability zero and must survive every operation:
``log_add(-inf, -inf) == -inf`` without warnings or NaN.
"""

from __future__ import annotations

import math
from typing import Iterable

import numpy as np

NEG_INF = float("-inf")


def log_add(a: float, b: float) -> float:
    """``ln(exp(a) + exp(b))`` for two scalars."""
    if a == NEG_INF:
        return b
    if b == NEG_INF:
        return a
    if a > b:
        return a + math.log1p(math.exp(b - a))
    return b + math.log1p(math.exp(a - b))


def logsumexp(values: Iterable[float] | np.ndarray, axis: int | None = None):
    """Log of the sum of exponentials, subtracting the max first.

    With ``axis=None`` the result is a Python float; otherwise an array with
    ``axis`` reduced. Slices that are entirely ``-inf`` reduce to ``-inf``.
    """
    x = np.asarray(values, dtype=np.float64)
    if axis is None:
        if x.size == 0:
            return NEG_INF
        x_max = float(np.max(x))
        if x_max == NEG_INF:
            return NEG_INF
        return x_max + math.log(float(np.sum(np.exp(x - x_max))))

    x_max = np.max(x, axis=axis, keepdims=True)
    safe_max = np.where(np.isneginf(x_max), 0.0, x_max)
    with np.errstate(divide="ignore"):
        out = np.log(np.sum(np.exp(x - safe_max), axis=axis, keepdims=True))
    out = out + safe_max
    return np.squeeze(out, axis=axis)


def log_softmax(logits: np.ndarray, axis: int = -1) -> np.ndarray:
    """Row-normalized log-probabilities; invariant to per-row constant shifts."""
    z = np.asarray(logits, dtype=np.float64)
    shifted = z - np.max(z, axis=axis, keepdims=True)
    return shifted - np.log(np.sum(np.exp(shifted), axis=axis, keepdims=True))
