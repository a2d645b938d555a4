"""Weighted moment accumulators that decouple M-steps from the raw data."""

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class SufficientStats:
    """Responsibility-weighted zeroth, first and second moments of the data.

    weight    : total responsibility mass (unnormalized)
    sum_x     : weighted sample sum, shape (n,)
    sum_outer : weighted sum of outer products, shape (n, n), stored symmetric
    """

    weight: float
    sum_x: np.ndarray
    sum_outer: np.ndarray

    def __post_init__(self):
        assert self.weight >= 0.0
        assert self.sum_x.ndim == 1
        assert self.sum_outer.shape == (self.sum_x.size, self.sum_x.size)


def accumulate_stats(X, beta, k):
    """Accumulate SufficientStats for component k from samples X and
    responsibilities beta (rows sum to one)."""
    X = np.asarray(X, dtype=float)
    w = np.asarray(beta, dtype=float)[:, k]
    outer = (X.T * w) @ X
    return SufficientStats(
        weight=float(w.sum()),
        sum_x=w @ X,
        sum_outer=0.5 * (outer + outer.T),
    )
