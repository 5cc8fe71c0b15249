"""Metrics, the Wilcoxon signed-rank test and average ranks."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

EXACT_MAX_N = 25
MIN_PAIRS = 5


class InsufficientPairsError(ValueError):
    """Fewer non-zero paired differences than the test needs."""


def accuracy(preds, labels) -> float:
    preds, labels = np.asarray(preds), np.asarray(labels)
    if preds.shape != labels.shape or preds.size == 0:
        raise ValueError("preds and labels must be non-empty and of equal length")
    return float(np.mean(preds == labels))


def mean_squared_error(preds, labels) -> float:
    preds, labels = np.asarray(preds, dtype=np.float64), np.asarray(labels, dtype=np.float64)
    if preds.shape != labels.shape or preds.size == 0:
        raise ValueError("preds and labels must be non-empty and of equal length")
    return float(np.mean((preds - labels) ** 2))


def average_tie_ranks(values) -> np.ndarray:
    """Ranks 1..n of ascending ``values``; tied entries share their mean rank."""
    v = np.asarray(values, dtype=np.float64)
    order = np.argsort(v, kind="stable")
    ranks = np.empty(v.shape[0])
    sv = v[order]
    i = 0
    while i < sv.shape[0]:
        j = i
        while j + 1 < sv.shape[0] and sv[j + 1] == sv[i]:
            j += 1
        ranks[order[i:j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1
    return ranks


def average_ranks(table, higher_is_better: bool = True) -> np.ndarray:
    """Mean rank of each model (column) over datasets (rows); 1 is best."""
    t = np.asarray(table, dtype=np.float64)
    if t.ndim != 2:
        raise ValueError("table must be datasets x models")
    signed = -t if higher_is_better else t
    return np.mean([average_tie_ranks(row) for row in signed], axis=0)


@dataclass(frozen=True)
class WilcoxonResult:
    p_value: float
    significant: bool
    # +1 if the first sample tends to be larger, -1 if smaller, 0 if balanced
    direction: int
    w_plus: float
    w_minus: float
    n: int
    exact: bool


def _signed_ranks(a, b):
    d = np.asarray(a, dtype=np.float64) - np.asarray(b, dtype=np.float64)
    d = d[d != 0]
    if d.size == 0:
        raise InsufficientPairsError("all paired differences are zero")
    return d, average_tie_ranks(np.abs(d))


def _exact_counts(doubled_ranks: np.ndarray) -> np.ndarray:
    """Number of sign assignments giving each doubled positive-rank sum."""
    total = int(doubled_ranks.sum())
    counts = np.zeros(total + 1, dtype=np.int64)
    counts[0] = 1
    for r in doubled_ranks.astype(np.int64):
        shifted = np.zeros_like(counts)
        shifted[r:] = counts[:total + 1 - r]
        counts = counts + shifted
    return counts


def exact_p_value(ranks, w_plus: float) -> float:
    doubled = np.rint(2 * np.asarray(ranks)).astype(np.int64)
    counts = _exact_counts(doubled)
    w = int(round(2 * w_plus))
    lo = int(counts[: w + 1].sum())
    hi = int(counts[w:].sum())
    return min(1.0, 2 * min(lo, hi) / 2 ** len(doubled))


def wilcoxon_signed_rank(paired_a, paired_b, alpha: float = 0.05, min_pairs: int = MIN_PAIRS) -> WilcoxonResult:
    """Two-sided signed-rank test on ``paired_a - paired_b``.

    Zero differences are dropped and tied magnitudes get average ranks.
    The null distribution is enumerated exactly up to 25 pairs; above that a
    normal approximation with tie and continuity correction is used.
    """
    d, ranks = _signed_ranks(paired_a, paired_b)
    n = d.size
    if n < min_pairs:
        raise InsufficientPairsError(f"{n} non-zero differences, need at least {min_pairs}")
    w_plus = float(ranks[d > 0].sum())
    w_minus = float(ranks[d < 0].sum())
    if n <= EXACT_MAX_N:
        p = exact_p_value(ranks, w_plus)
        exact = True
    else:
        mean = n * (n + 1) / 4.0
        _, tie_sizes = np.unique(ranks, return_counts=True)
        var = n * (n + 1) * (2 * n + 1) / 24.0 - float(np.sum(tie_sizes ** 3 - tie_sizes)) / 48.0
        dev = abs(w_plus - mean) - 0.5
        z = max(dev, 0.0) / math.sqrt(var) if var > 0 else 0.0
        p = min(1.0, math.erfc(z / math.sqrt(2.0)))
        exact = False
    direction = int(np.sign(w_plus - w_minus))
    return WilcoxonResult(p, p < alpha, direction, w_plus, w_minus, n, exact)
