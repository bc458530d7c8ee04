"""Baseline correlation metrics: PCC, SRCC and Kendall's tau.

Kendall's tau defaults to the tie-corrected tau-b. It is computed from
exact integer pair counts, so the value is bit-identical to a direct
enumeration over all pairs. SRCC is the Pearson correlation of average
(fractional) ranks.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.stats import rankdata

from .errors import DegenerateStatisticError


@dataclass(frozen=True)
class MetricValue:
    name: str
    value: float
    n_items: int
    n_pairs_used: int


def _as_vectors(y, y_hat) -> tuple[np.ndarray, np.ndarray]:
    a = np.asarray(y, dtype=float)
    b = np.asarray(y_hat, dtype=float)
    if a.ndim != 1 or b.ndim != 1:
        raise ValueError("inputs must be 1-D vectors")
    if len(a) != len(b):
        raise ValueError(f"length mismatch: {len(a)} vs {len(b)}")
    if len(a) < 2:
        raise ValueError("need at least 2 items")
    return a, b


def _pearson(a: np.ndarray, b: np.ndarray) -> float:
    da = a - a.mean()
    db = b - b.mean()
    va = float(np.dot(da, da))
    vb = float(np.dot(db, db))
    if va == 0.0 or vb == 0.0:
        raise DegenerateStatisticError("constant vector has no defined correlation")
    return float(np.dot(da, db)) / math.sqrt(va * vb)


def pcc(y, y_hat) -> MetricValue:
    """Sample Pearson correlation."""
    a, b = _as_vectors(y, y_hat)
    n = len(a)
    return MetricValue("PCC", _pearson(a, b), n, n * (n - 1) // 2)


def srcc(y, y_hat) -> MetricValue:
    """Spearman rank correlation; ties receive average ranks."""
    a, b = _as_vectors(y, y_hat)
    n = len(a)
    value = _pearson(rankdata(a, method="average"), rankdata(b, method="average"))
    return MetricValue("SRCC", value, n, n * (n - 1) // 2)


def _pair_sign_counts(a: np.ndarray, b: np.ndarray) -> tuple[int, int, int, int]:
    """(concordant, discordant, ties_in_a, ties_in_b) over unordered pairs."""
    sa = np.sign(a[:, None] - a[None, :])
    sb = np.sign(b[:, None] - b[None, :])
    prod = sa * sb
    n = len(a)
    concordant = int(np.count_nonzero(prod > 0)) // 2
    discordant = int(np.count_nonzero(prod < 0)) // 2
    ties_a = (int(np.count_nonzero(sa == 0)) - n) // 2
    ties_b = (int(np.count_nonzero(sb == 0)) - n) // 2
    return concordant, discordant, ties_a, ties_b


def ktau(y, y_hat, variant: str = "b") -> MetricValue:
    """Kendall rank correlation.

    ``variant="b"`` applies the standard tie correction; ``variant="a"``
    divides the concordant-discordant balance by the total pair count.
    """
    if variant not in ("a", "b"):
        raise ValueError(f"unknown tau variant {variant!r}")
    a, b = _as_vectors(y, y_hat)
    n = len(a)
    n0 = n * (n - 1) // 2
    c, d, ta, tb = _pair_sign_counts(a, b)
    if variant == "a":
        value = (c - d) / n0
    else:
        denom_a = n0 - ta
        denom_b = n0 - tb
        if denom_a == 0 or denom_b == 0:
            raise DegenerateStatisticError("all pairs tied in one vector")
        value = (c - d) / math.sqrt(denom_a * denom_b)
    return MetricValue("KTAU", value, n, n0)
