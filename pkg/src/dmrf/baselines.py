"""Comparison forests: BriemanRF, Denil14, BRF and MRF.

Denil14, BRF and MRF come in two data modes. ``se`` is the original
structure/estimation protocol: a random ``ratio`` share of the data grows
the splits and the rest fills the leaves. ``b`` drops that split and uses
the Bernoulli bootstrap of the DMRF forest, with leaves filled by the
training samples themselves.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import _kernels
from .data import Dataset
from .forest import ForestModel, bernoulli_bootstrap, train_forest, tree_rng
from .params import HyperParams
from .splitting import (SplitContext, SplitPoint, bernoulli, best_split, multinomial_split,
                        sample_categorical, subspace_size)
from .tree import build_tree, refill_leaves, sample_leaf_labels

FAMILIES = ("brieman", "denil14", "brf", "mrf", "dmrf")


@dataclass(frozen=True)
class VariantSpec:
    family: str
    data_mode: Optional[str]  # "se", "b", or None for BriemanRF

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown family {self.family!r}")
        if self.family == "brieman" and self.data_mode is not None:
            raise ValueError("BriemanRF uses the classic bootstrap only")
        if self.family == "dmrf" and self.data_mode != "b":
            raise ValueError("DMRF is only defined with the Bernoulli bootstrap")
        if self.family in ("denil14", "brf", "mrf") and self.data_mode not in ("se", "b"):
            raise ValueError(f"{self.family} needs data mode 'se' or 'b'")

    @classmethod
    def parse(cls, name: str) -> "VariantSpec":
        name = name.lower()
        if name == "brieman":
            return cls("brieman", None)
        if name == "dmrf":
            return cls("dmrf", "b")
        family, _, mode = name.partition("-")
        return cls(family, mode or None)

    @property
    def name(self) -> str:
        if self.family == "brieman" or self.family == "dmrf":
            return self.family
        return f"{self.family}-{self.data_mode}"

    @property
    def label(self) -> str:
        pretty = {"brieman": "BriemanRF", "dmrf": "DMRF", "denil14": "Denil14", "brf": "BRF", "mrf": "MRF"}
        base = pretty[self.family]
        if self.data_mode is None or self.family == "dmrf":
            return base
        return f"{base}({self.data_mode.upper() if self.data_mode == 'se' else 'b'})"


def structure_estimation_split(indices, ratio: float, rng) -> tuple[np.ndarray, np.ndarray]:
    """Random disjoint (structure, estimation) split with ``round(ratio * n)`` structure points."""
    if not 0.0 < ratio < 1.0:
        raise ValueError("ratio must lie in (0, 1)")
    idx = np.asarray(indices, dtype=np.int64)
    n = idx.shape[0]
    # round half up: ratio 0.5 on 3 points gives 2 structure points
    n_struct = int(np.floor(ratio * n + 0.5))
    if n_struct < 1 or n_struct >= n:
        raise ValueError(f"ratio {ratio} leaves an empty part for n={n}")
    perm = rng.permutation(idx)
    return np.sort(perm[:n_struct]), np.sort(perm[n_struct:])


def _random_subspace(rng, D: int, size: int) -> np.ndarray:
    return rng.choice(D, size=size, replace=False)


def select_split_brieman(ctx: SplitContext, idx, params, rng) -> Optional[SplitPoint]:
    """Optimal split within a fresh uniform subspace of ``floor(sqrt(D))`` features."""
    D = ctx.n_features
    return best_split(ctx, idx, _random_subspace(rng, D, subspace_size(D)))


def poisson_inversion(lam: float, rng) -> int:
    """Poisson draw by sequential search of the CDF with one uniform."""
    u = rng.random()
    k = 0
    p = np.exp(-lam)
    cdf = p
    while u > cdf:
        k += 1
        p *= lam / k
        cdf += p
        if p == 0.0:
            break
    return k


def denil14_subspace_size(D: int, lam: float, rng) -> int:
    return min(1 + poisson_inversion(lam, rng), D)


def select_split_denil14(ctx: SplitContext, idx, params, rng) -> Optional[SplitPoint]:
    """Best split evaluated on ``min(m, |node|)`` preselected node samples.

    Candidate thresholds and their impurity reductions both come from the
    preselected points; the feature subspace has size
    ``min(1 + Poisson(lambda), D)``.
    """
    idx = np.asarray(idx)
    n = idx.shape[0]
    if params.m < n:
        pre = np.sort(rng.choice(idx, size=params.m, replace=False))
    else:
        pre = idx
    D = ctx.n_features
    s = denil14_subspace_size(D, params.lam, rng)
    return best_split(ctx, pre, _random_subspace(rng, D, s))


def select_split_brf(ctx: SplitContext, idx, params, rng) -> Optional[SplitPoint]:
    """Two Bernoulli gates: subspace size 1 vs sqrt(D), then random vs optimal threshold per feature."""
    D = ctx.n_features
    size = 1 if bernoulli(rng, params.p1) else subspace_size(D)
    feats = np.sort(_random_subspace(rng, D, size))
    reds, points = [], []
    for j in feats:
        if bernoulli(rng, params.p2):
            thr, red = ctx.scan(int(j), idx)
            if thr.shape[0] == 0:
                continue
            k = int(rng.integers(thr.shape[0]))
            r, t = red[k], thr[k]
        else:
            b, t_arr, valid = ctx.best_per_feature(idx, np.array([j]))
            if not valid[0]:
                continue
            r, t = b[0], t_arr[0]
        reds.append(r)
        points.append(SplitPoint(int(j), float(t)))
    if not points:
        return None
    # same tie rule as best_split, so p1 = p2 = 0 reproduces it exactly
    return points[_kernels.first_near_max(np.array(reds), ctx.tie_tolerance(idx))]


def select_split_mrf(ctx: SplitContext, idx, params, rng) -> Optional[SplitPoint]:
    """Tempered-multinomial feature and threshold sampling at every node."""
    ctx.counters["multinomial"] += 1
    return multinomial_split(ctx, idx, params.B1, params.B2, rng)


def mrf_leaf_label(proportions, rng) -> int:
    p = np.asarray(proportions, dtype=np.float64)
    return sample_categorical(p / p.sum(), rng)


STRATEGIES = {
    "brieman": select_split_brieman,
    "denil14": select_split_denil14,
    "brf": select_split_brf,
    "mrf": select_split_mrf,
}


def _grow_variant(spec: VariantSpec, X, y, task, n_classes, params: HyperParams, index: int):
    rng = tree_rng(params.seed, index)
    ctx = SplitContext(X, y, task, n_classes, params.weighted_mse_reduction)
    strategy = STRATEGIES[spec.family]
    n = X.shape[0]
    if spec.family == "brieman":
        idx = np.sort(rng.integers(0, n, size=n))
        tree = build_tree(ctx, idx, params, strategy, rng)
    elif spec.data_mode == "b":
        idx = bernoulli_bootstrap(n, params.q_n, rng)
        tree = build_tree(ctx, idx, params, strategy, rng)
    else:
        struct, est = structure_estimation_split(np.arange(n), params.ratio, rng)
        tree = build_tree(ctx, struct, params, strategy, rng)
        # leaves with no estimation sample keep the structure payload
        refill_leaves(tree, ctx, est)
    if spec.family == "mrf" and ctx.is_classification:
        sample_leaf_labels(tree, rng)
    return tree, ctx.counters


class _Grower:
    """Picklable per-tree job bound to one variant."""

    def __init__(self, spec: VariantSpec):
        self.spec = spec

    def __call__(self, X, y, task, n_classes, params, index):
        return _grow_variant(self.spec, X, y, task, n_classes, params, index)


def grower_for(variant: str):
    spec = VariantSpec.parse(variant)
    if spec.family == "dmrf":
        raise ValueError("DMRF is grown by the forest module")
    return _Grower(spec)


def train_variant(ds: Dataset, params: HyperParams, variant: str, workers: int = 1) -> ForestModel:
    return train_forest(ds, params.replace(variant=variant), workers)


def train_brieman(ds: Dataset, params: HyperParams = HyperParams(), workers: int = 1) -> ForestModel:
    """Classic random forest: with-replacement bootstrap and sqrt(D) subspaces."""
    return train_variant(ds, params, "brieman", workers)
