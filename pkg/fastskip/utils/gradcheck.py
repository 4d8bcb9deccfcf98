"""Central-difference gradient checks for hand-written backward passes."""

from typing import Callable, Optional

import numpy as np

DEFAULT_STEP = 1e-5


def numeric_grad(
    func: Callable[[np.ndarray], float],
    x: np.ndarray,
    h: float = DEFAULT_STEP,
    max_entries: Optional[int] = None,
    seed: int = 0,
) -> tuple:
    """Estimate ``d func / d x`` entry by entry, perturbing ``x`` in place.

    Returns ``(indices, estimates)``. With ``max_entries`` only a seeded random
    subset of flat indices is checked.
    """
    flat = x.reshape(-1)
    indices = np.arange(flat.shape[0])
    if max_entries is not None and max_entries < flat.shape[0]:
        rng = np.random.default_rng(seed)
        indices = np.sort(rng.choice(flat.shape[0], size=max_entries, replace=False))

    estimates = np.zeros(indices.shape[0])
    for n, i in enumerate(indices):
        original = flat[i]
        flat[i] = original + h
        plus = func(x)
        flat[i] = original - h
        minus = func(x)
        flat[i] = original
        estimates[n] = (plus - minus) / (2.0 * h)
    return indices, estimates


def relative_error(analytic: np.ndarray, numeric: np.ndarray, floor: float = 1e-8) -> float:
    """max |a - n| / max(|a| + |n|, floor), over all entries."""
    a = np.asarray(analytic, dtype=np.float64).reshape(-1)
    n = np.asarray(numeric, dtype=np.float64).reshape(-1)
    if a.size == 0:
        return 0.0
    denom = np.maximum(np.abs(a) + np.abs(n), floor)
    return float(np.max(np.abs(a - n) / denom))
