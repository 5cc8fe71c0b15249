"""Impurity criteria and split-selection strategies.

Split rule everywhere: a sample goes left iff its feature value is ``<=``
the threshold. Thresholds are observed values, never midpoints.
"""
from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import _kernels
from .data import CLASSIFICATION, Dataset

# reductions closer than this fraction of the node impurity count as tied;
# rounding noise is ~1e-16 of it, genuine differences far larger
TIE_RTOL = 1e-11


@dataclass(frozen=True)
class SplitPoint:
    feature: int
    threshold: float


@dataclass
class NodeStats:
    """Sufficient statistics of the samples at a node.

    Classification nodes carry ``class_counts``; regression nodes carry the
    ``(count, sum, sum_sq)`` triple.
    """

    sample_indices: np.ndarray
    class_counts: Optional[np.ndarray] = None
    count: int = 0
    sum: float = 0.0
    sum_sq: float = 0.0

    @classmethod
    def from_labels(cls, labels, task: str, n_classes: int = 0, indices=None) -> "NodeStats":
        labels = np.asarray(labels)
        if indices is None:
            indices = np.arange(labels.shape[0])
        if task == CLASSIFICATION:
            counts = np.bincount(labels.astype(np.int64), minlength=n_classes)
            return cls(np.asarray(indices), class_counts=counts, count=int(labels.shape[0]))
        y = labels.astype(np.float64)
        return cls(np.asarray(indices), count=int(y.shape[0]), sum=float(y.sum()),
                   sum_sq=float((y * y).sum()))

    @property
    def is_classification(self) -> bool:
        return self.class_counts is not None


@dataclass
class ImpurityProfile:
    """Per-feature best reductions plus the per-threshold vector of one feature.

    Unsplittable features are marked in ``splittable`` instead of being given
    a fake reduction.
    """

    features: np.ndarray
    per_feature_best: np.ndarray
    splittable: np.ndarray
    per_value: Optional[np.ndarray] = None
    thresholds: Optional[np.ndarray] = None


def gini(class_counts) -> float:
    counts = np.asarray(class_counts)
    if (counts < 0).any():
        raise ValueError("class counts must be non-negative")
    total = counts.sum()
    if total <= 0:
        raise ValueError("gini of an empty node is undefined")
    s = 0.0
    for c in counts:
        p = c / total
        s += p * p
    return 1.0 - s


def mse(stats: NodeStats) -> float:
    if stats.count <= 0:
        raise ValueError("mse of an empty node is undefined")
    n = stats.count
    mean = stats.sum / n
    return max(0.0, stats.sum_sq / n - mean * mean)


def impurity_reduction(parent: NodeStats, left: NodeStats, right: NodeStats,
                       criterion: str = "gini", weighted_mse: bool = False) -> float:
    """Decrease in impurity achieved by splitting ``parent`` into two children.

    Gini uses the size-weighted form. MSE is unweighted by default,
    ``MSE(parent) - MSE(left) - MSE(right)``; pass ``weighted_mse=True`` for
    the usual CART weighting.
    """
    if left.count <= 0 or right.count <= 0:
        raise ValueError("both children must be non-empty")
    if left.count + right.count != parent.count:
        raise ValueError("children do not partition the parent")
    n, nl, nr = parent.count, left.count, right.count
    if criterion == "gini":
        return gini(parent.class_counts) - (nl / n) * gini(left.class_counts) - (nr / n) * gini(right.class_counts)
    if criterion == "mse":
        if weighted_mse:
            return mse(parent) - (nl / n) * mse(left) - (nr / n) * mse(right)
        return mse(parent) - mse(left) - mse(right)
    raise ValueError(f"unknown criterion {criterion!r}")


def candidate_thresholds(feature_values) -> np.ndarray:
    v = np.unique(np.asarray(feature_values, dtype=np.float64))
    return v[:-1]


def minmax_normalize(v) -> np.ndarray:
    v = np.asarray(v, dtype=np.float64)
    lo, hi = v.min(), v.max()
    if hi == lo:
        return np.zeros_like(v)
    return (v - lo) / (hi - lo)


def tempered_softmax(v, B: float) -> np.ndarray:
    if B < 0:
        raise ValueError("temperature coefficient must be non-negative")
    z = B * np.asarray(v, dtype=np.float64)
    z = z - z.max()
    e = np.exp(z)
    return e / e.sum()


def sample_categorical(probs, rng) -> int:
    """Draw an index by inverting the cumulative distribution."""
    p = np.asarray(probs, dtype=np.float64)
    if (p < 0).any():
        raise ValueError("probabilities must be non-negative")
    if abs(p.sum() - 1.0) > 1e-9:
        raise ValueError(f"probabilities sum to {p.sum()}, not 1")
    cdf = np.cumsum(p)
    i = int(np.searchsorted(cdf, rng.random(), side="right"))
    if i >= p.shape[0]:
        i = int(np.flatnonzero(p > 0)[-1])
    return i


def bernoulli(rng, p: float) -> bool:
    # degenerate probabilities consume no randomness, so p in {0, 1}
    # reproduces the deterministic branch draw for draw
    if p <= 0.0:
        return False
    if p >= 1.0:
        return True
    return bool(rng.random() < p)


def subspace_size(n_features: int) -> int:
    return max(1, math.isqrt(n_features))


@dataclass
class SplitContext:
    """Training data plus criterion settings shared by every node of a tree."""

    X: np.ndarray
    y: np.ndarray
    task: str
    n_classes: int = 0
    weighted_mse: bool = False
    counters: Counter = field(default_factory=Counter)
    # the node being split and its samples presorted by every feature; set
    # by the tree builder so scans of that node skip the per-node sort
    node_idx: Optional[np.ndarray] = field(default=None, repr=False)
    node_sorted: Optional[np.ndarray] = field(default=None, repr=False)

    @classmethod
    def from_dataset(cls, ds: Dataset, weighted_mse: bool = False) -> "SplitContext":
        return cls(ds.features, ds.labels, ds.task, ds.n_classes, weighted_mse)

    @property
    def n_features(self) -> int:
        return self.X.shape[1]

    @property
    def is_classification(self) -> bool:
        return self.task == CLASSIFICATION

    def enter_node(self, idx: np.ndarray, sorted_cols: np.ndarray):
        self.node_idx, self.node_sorted = idx, sorted_cols

    def orders(self, idx: np.ndarray, feats: np.ndarray) -> np.ndarray:
        """Samples of ``idx`` sorted by each of ``feats``, one row per feature."""
        if idx is self.node_idx:
            return self.node_sorted[feats]
        return _kernels.orders_for(self.X, idx, feats)

    def scan(self, feature: int, idx: np.ndarray):
        """Candidate thresholds and their reductions for one feature."""
        col = self.X[:, feature]
        order = self.orders(idx, np.array([feature], dtype=np.int64))[0]
        if self.is_classification:
            return _kernels.class_scan_ordered(col, self.y, order, self.n_classes)
        return _kernels.reg_scan_ordered(col, self.y, order, self.weighted_mse)

    def tie_tolerance(self, idx: np.ndarray) -> float:
        if self.is_classification:
            parent = _kernels.node_impurity_class(self.y, idx, self.n_classes)
        else:
            parent = _kernels.node_impurity_reg(self.y, idx)
        return TIE_RTOL * parent

    def best_per_feature(self, idx: np.ndarray, features: np.ndarray):
        feats = np.asarray(features, dtype=np.int64)
        tol = self.tie_tolerance(idx)
        orders = self.orders(idx, feats)
        if self.is_classification:
            return _kernels.best_per_feature_class(self.X, self.y, orders, feats, self.n_classes, tol)
        return _kernels.best_per_feature_reg(self.X, self.y, orders, feats, self.weighted_mse, tol)

    def is_pure(self, idx: np.ndarray) -> bool:
        ys = self.y[idx]
        return bool(ys.min() == ys.max())


def impurity_profile(ctx: SplitContext, idx: np.ndarray, features=None) -> ImpurityProfile:
    feats = np.arange(ctx.n_features) if features is None else np.asarray(features, dtype=np.int64)
    best, _, valid = ctx.best_per_feature(idx, feats)
    return ImpurityProfile(feats, np.where(valid, best, np.nan), valid)


def best_split(ctx: SplitContext, idx: np.ndarray, features) -> Optional[SplitPoint]:
    """Exhaustive search over ``features`` x candidate thresholds.

    Ties go to the lower feature index, then the lower threshold.
    """
    feats = np.sort(np.asarray(features, dtype=np.int64))
    best, thr, valid = ctx.best_per_feature(idx, feats)
    if not valid.any():
        return None
    # features are sorted, so the first near-maximum is the lowest index
    cand = np.flatnonzero(valid)
    k = cand[_kernels.first_near_max(best[cand], ctx.tie_tolerance(idx))]
    return SplitPoint(int(feats[k]), float(thr[k]))


def multinomial_split(ctx: SplitContext, idx: np.ndarray, B1: float, B2: float, rng) -> Optional[SplitPoint]:
    """Sample a feature, then a threshold, from tempered softmaxes of reductions."""
    feats = np.arange(ctx.n_features)
    best, _, valid = ctx.best_per_feature(idx, feats)
    if not valid.any():
        return None
    cand = feats[valid]
    alpha = tempered_softmax(minmax_normalize(best[valid]), B1)
    j = int(cand[sample_categorical(alpha, rng)])
    thr, red = ctx.scan(j, idx)
    beta = tempered_softmax(minmax_normalize(red), B2)
    return SplitPoint(j, float(thr[sample_categorical(beta, rng)]))


def select_split_dmrf(ctx: SplitContext, idx: np.ndarray, params, rng) -> Optional[SplitPoint]:
    """One DMRF node decision.

    With probability ``p`` take the optimal split in a random subspace of
    ``floor(sqrt(D))`` features (falling back to all features when none in
    the subspace can split); otherwise sample feature and threshold from the
    tempered multinomials over the full feature space.
    """
    D = ctx.n_features
    if bernoulli(rng, params.p):
        ctx.counters["optimal"] += 1
        s = subspace_size(D)
        feats = rng.choice(D, size=s, replace=False)
        split = best_split(ctx, idx, feats)
        if split is None and s < D:
            split = best_split(ctx, idx, np.arange(D))
        return split
    ctx.counters["multinomial"] += 1
    return multinomial_split(ctx, idx, params.B1, params.B2, rng)
