"""Transducer output lattice: forward/backward variables in log space.

The lattice for T frames and U target tokens is the grid of nodes (t, u) with
``1 <= t <= T`` and ``0 <= u <= U``. From node (t, u) a blank move goes to
(t+1, u) and a label move emitting ``y_{u+1}`` goes to (t, u+1). Every path
starts at (1, 0) and ends with the terminal blank out of (T, U).

Grids are stored padded to shape ``(T+2, U+2)`` so that ``grid[t, u]`` uses
the lattice coordinates directly; row 0, row T+1 and column U+1 hold
``-inf``. The accessors (``alpha_at`` etc.) return ``-inf`` for any node
outside the lattice instead of raising, so recursions read like the
equations they implement.

Usage::

    probs = NodeProbs.from_arrays(blank_lp, label_lp)   # (T, U+1), (T, U)
    lattice = Lattice.build(probs)
    logp = sequence_logprob(lattice)
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Tuple

import numpy as np

from fastskip.utils.exceptions import (
    LatticeIndexError,
    LatticeShapeError,
    PathEnumerationError,
)

from .logspace import NEG_INF, log_add, logsumexp

# Brute-force enumeration is exponential; T+U above this is refused.
MAX_ENUMERATION_SIZE = 14

# A path is the sequence of moves taken: 0 is a blank move, k >= 1 emits y_k.
Path = Tuple[int, ...]


def _padded(T: int, U: int) -> np.ndarray:
    return np.full((T + 2, U + 2), NEG_INF, dtype=np.float64)


@dataclass(frozen=True)
class NodeProbs:
    """Per-node blank and label log-probabilities on padded grids.

    ``blank_grid[t, u]`` is ln ∅(t, u); ``label_grid[t, u]`` is ln y(t, u), the
    log-probability of emitting ``y_{u+1}`` at (t, u), ``-inf`` for ``u = U``.
    """

    T: int
    U: int
    blank_grid: np.ndarray
    label_grid: np.ndarray

    @classmethod
    def from_arrays(cls, blank_lp: np.ndarray, label_lp: np.ndarray) -> "NodeProbs":
        """Build from unpadded arrays: blank ``(T, U+1)``, label ``(T, U)``."""
        blank = np.asarray(blank_lp, dtype=np.float64)
        if blank.ndim != 2 or blank.shape[0] < 1 or blank.shape[1] < 1:
            raise LatticeShapeError(
                "blank_lp must be a (T, U+1) array with T >= 1",
                actual=tuple(blank.shape),
            )
        T, U = blank.shape[0], blank.shape[1] - 1
        label = np.asarray(label_lp, dtype=np.float64)
        if label.size == 0 and U == 0:
            label = label.reshape(T, 0)
        if label.shape != (T, U):
            raise LatticeShapeError(
                "label_lp shape does not match blank_lp",
                expected=(T, U),
                actual=tuple(label.shape),
            )

        blank_grid = _padded(T, U)
        label_grid = _padded(T, U)
        blank_grid[1 : T + 1, 0 : U + 1] = blank
        label_grid[1 : T + 1, 0:U] = label
        return cls(T=T, U=U, blank_grid=blank_grid, label_grid=label_grid)

    @property
    def blank_lp(self) -> np.ndarray:
        """Unpadded ``(T, U+1)`` view, row ``t-1`` holds frame t."""
        return self.blank_grid[1 : self.T + 1, 0 : self.U + 1]

    @property
    def label_lp(self) -> np.ndarray:
        """Unpadded ``(T, U)`` view."""
        return self.label_grid[1 : self.T + 1, 0 : self.U]

    def blank(self, t: int, u: int) -> float:
        if 1 <= t <= self.T and 0 <= u <= self.U:
            return float(self.blank_grid[t, u])
        return NEG_INF

    def label(self, t: int, u: int) -> float:
        if 1 <= t <= self.T and 0 <= u < self.U:
            return float(self.label_grid[t, u])
        return NEG_INF

    def check_dims(self, T: int, U: int) -> None:
        if (T, U) != (self.T, self.U):
            raise LatticeShapeError(
                "node_probs dimensions do not match (T, U)",
                expected=(T, U),
                actual=(self.T, self.U),
            )


def forward_vars(node_probs: NodeProbs, T: int, U: int) -> np.ndarray:
    """Forward variables on the padded grid.

    alpha(1, 0) = 0 and
    alpha(t, u) = lse(alpha(t-1, u) + ∅(t-1, u), alpha(t, u-1) + y(t, u-1)).
    """
    if T < 1 or U < 0:
        raise LatticeShapeError("need T >= 1 and U >= 0", actual=(T, U))
    node_probs.check_dims(T, U)

    blank = node_probs.blank_grid.tolist()
    label = node_probs.label_grid.tolist()
    alpha = _padded(T, U).tolist()
    alpha[1][0] = 0.0
    for t in range(1, T + 1):
        row, prev = alpha[t], alpha[t - 1]
        prev_blank, row_label = blank[t - 1], label[t]
        for u in range(U + 1):
            if t == 1 and u == 0:
                continue
            stay = prev[u] + prev_blank[u]
            emit = row[u - 1] + row_label[u - 1] if u > 0 else NEG_INF
            row[u] = log_add(stay, emit)
    return np.array(alpha, dtype=np.float64)


def backward_vars(node_probs: NodeProbs, T: int, U: int) -> np.ndarray:
    """Backward variables on the padded grid.

    beta(T, U) = ∅(T, U) and
    beta(t, u) = lse(beta(t+1, u) + ∅(t, u), beta(t, u+1) + y(t, u)).
    """
    if T < 1 or U < 0:
        raise LatticeShapeError("need T >= 1 and U >= 0", actual=(T, U))
    node_probs.check_dims(T, U)

    blank = node_probs.blank_grid.tolist()
    label = node_probs.label_grid.tolist()
    beta = _padded(T, U).tolist()
    for t in range(T, 0, -1):
        row, nxt = beta[t], beta[t + 1]
        row_blank, row_label = blank[t], label[t]
        for u in range(U, -1, -1):
            if t == T and u == U:
                row[u] = row_blank[u]
                continue
            row[u] = log_add(nxt[u] + row_blank[u], row[u + 1] + row_label[u])
    return np.array(beta, dtype=np.float64)


@dataclass(frozen=True)
class Lattice:
    """Node probabilities together with their forward and backward variables."""

    T: int
    U: int
    node_probs: NodeProbs
    alpha: np.ndarray
    beta: np.ndarray

    @classmethod
    def build(cls, node_probs: NodeProbs) -> "Lattice":
        T, U = node_probs.T, node_probs.U
        return cls(
            T=T,
            U=U,
            node_probs=node_probs,
            alpha=forward_vars(node_probs, T, U),
            beta=backward_vars(node_probs, T, U),
        )

    def contains(self, t: int, u: int) -> bool:
        return 1 <= t <= self.T and 0 <= u <= self.U

    def alpha_at(self, t: int, u: int) -> float:
        return float(self.alpha[t, u]) if self.contains(t, u) else NEG_INF

    def beta_at(self, t: int, u: int) -> float:
        return float(self.beta[t, u]) if self.contains(t, u) else NEG_INF

    def diagonal(self, n: int) -> List[Tuple[int, int]]:
        """Nodes with t + u = n, ordered by t."""
        return [(t, n - t) for t in range(1, self.T + 1) if 0 <= n - t <= self.U]


def sequence_logprob(lattice: Lattice) -> float:
    """ln P(y|x) = alpha(T, U) + ∅(T, U)."""
    T, U = lattice.T, lattice.U
    return float(lattice.alpha[T, U] + lattice.node_probs.blank_grid[T, U])


def diagonal_logprob(lattice: Lattice, n: int) -> float:
    """lse of alpha + beta over the diagonal t + u = n; equals ln P(y|x)."""
    nodes = lattice.diagonal(n)
    return logsumexp([lattice.alpha[t, u] + lattice.beta[t, u] for t, u in nodes])


def transition_scores(lattice: Lattice) -> Tuple[np.ndarray, np.ndarray]:
    """Unnormalized log-weights of every move, excluding the move's own probability.

    Returns ``(blank_scores, label_scores)`` as ``(T, U+1)`` arrays with row
    ``t-1`` for frame t: ``alpha(t, u) + beta(t+1, u)`` and
    ``alpha(t, u) + beta(t, u+1)``. The terminal blank out of (T, U) scores
    ``alpha(T, U)``; label moves out of column U score ``-inf``.
    """
    T, U = lattice.T, lattice.U
    alpha = lattice.alpha[1 : T + 1, 0 : U + 1]
    beta_next_t = lattice.beta[2 : T + 2, 0 : U + 1].copy()
    beta_next_t[T - 1, U] = 0.0
    beta_next_u = lattice.beta[1 : T + 1, 1 : U + 2]
    return alpha + beta_next_t, alpha + beta_next_u


def node_posterior_split(lattice: Lattice, t: int, u: int) -> Tuple[float, float]:
    """Split paths through (t, u) into the label-move and blank-move parts.

    Returns ``(nb_lp, b_lp)`` with lse(nb_lp, b_lp) = alpha(t, u) + beta(t, u).
    """
    if not lattice.contains(t, u):
        raise LatticeIndexError(t, u, lattice.T, lattice.U)
    probs = lattice.node_probs
    a = float(lattice.alpha[t, u])
    nb_lp = a + probs.label(t, u) + lattice.beta_at(t, u + 1)
    if t == lattice.T and u == lattice.U:
        b_lp = a + probs.blank(t, u)
    else:
        b_lp = a + probs.blank(t, u) + lattice.beta_at(t + 1, u)
    return nb_lp, b_lp


def enumerate_paths(node_probs: NodeProbs, T: int, U: int) -> List[Tuple[Path, float]]:
    """Every monotone path with its log-probability. Test oracle only.

    A path holds T blank moves and U label moves and always ends in the
    terminal blank, so there are C(T+U-1, U) of them.
    """
    if T + U > MAX_ENUMERATION_SIZE:
        raise PathEnumerationError(T, U, MAX_ENUMERATION_SIZE)
    if T < 1 or U < 0:
        raise LatticeShapeError("need T >= 1 and U >= 0", actual=(T, U))
    node_probs.check_dims(T, U)

    paths: List[Tuple[Path, float]] = []

    def walk(t: int, u: int, moves: Path, lp: float) -> None:
        if t == T and u == U:
            paths.append((moves + (0,), lp + node_probs.blank(t, u)))
            return
        if u < U:
            walk(t, u + 1, moves + (u + 1,), lp + node_probs.label(t, u))
        if t < T:
            walk(t + 1, u, moves + (0,), lp + node_probs.blank(t, u))

    walk(1, 0, (), 0.0)
    return paths
