"""Tree growth with the minimum-node-size stopping rule, and single-tree prediction."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from . import _kernels
from .data import CLASSIFICATION
from .params import HyperParams
from .splitting import SplitContext, SplitPoint, sample_categorical

Strategy = Callable[[SplitContext, np.ndarray, HyperParams, np.random.Generator], Optional[SplitPoint]]

LEAF = -1


@dataclass
class Tree:
    """A binary tree stored as parallel node arrays (node 0 is the root).

    Internal nodes have ``feature >= 0``; leaves have ``feature == -1``.
    For classification ``value`` holds leaf class counts, for regression a
    single column with the leaf mean. ``label`` holds a leaf label sampled at
    training time (multinomial leaf mode) and is -1 otherwise.
    """

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    n_samples: np.ndarray
    value: np.ndarray
    label: np.ndarray
    task: str
    n_classes: int = 0

    @property
    def n_nodes(self) -> int:
        return self.feature.shape[0]

    @property
    def is_leaf(self) -> np.ndarray:
        return self.feature < 0

    def leaves(self) -> np.ndarray:
        return np.flatnonzero(self.feature < 0)

    def depth(self) -> int:
        depth = np.zeros(self.n_nodes, dtype=np.int64)
        for i in range(self.n_nodes):
            if self.feature[i] >= 0:
                depth[self.left[i]] = depth[i] + 1
                depth[self.right[i]] = depth[i] + 1
        return int(depth.max())

    def apply(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.ndim == 1:
            X = X[None, :]
        return _kernels.apply_tree(self.feature, self.threshold, self.left, self.right, X)

    def leaf_distribution(self, X) -> np.ndarray:
        """Class proportions of the leaf each row falls into."""
        counts = self.value[self.apply(X)]
        return counts / counts.sum(axis=1, keepdims=True)

    def predict_class(self, X, rng) -> np.ndarray:
        """Per-row class of the reached leaf, ties broken uniformly at random."""
        leaves = self.apply(X)
        if (self.label[leaves] >= 0).all():
            return self.label[leaves].copy()
        counts = self.value[leaves]
        out = argmax_random_ties(counts, rng)
        sampled = self.label[leaves] >= 0
        out[sampled] = self.label[leaves][sampled]
        return out

    def predict_value(self, X) -> np.ndarray:
        return self.value[self.apply(X), 0].copy()

    def structure_equals(self, other: "Tree") -> bool:
        return (self.n_nodes == other.n_nodes
                and np.array_equal(self.feature, other.feature)
                and np.array_equal(self.threshold, other.threshold, equal_nan=True)
                and np.array_equal(self.left, other.left)
                and np.array_equal(self.right, other.right)
                and np.array_equal(self.n_samples, other.n_samples)
                and np.array_equal(self.value, other.value)
                and np.array_equal(self.label, other.label))


def argmax_random_ties(scores: np.ndarray, rng) -> np.ndarray:
    """Row-wise argmax choosing uniformly among tied maxima."""
    scores = np.atleast_2d(scores)
    top = scores == scores.max(axis=1, keepdims=True)
    if (top.sum(axis=1) == 1).all():
        return np.argmax(scores, axis=1)
    u = rng.random(scores.shape)
    return np.argmax(np.where(top, u, -1.0), axis=1)


class _Builder:
    def __init__(self, ctx: SplitContext):
        self.ctx = ctx
        self.feature: list[int] = []
        self.threshold: list[float] = []
        self.left: list[int] = []
        self.right: list[int] = []
        self.n_samples: list[int] = []
        self.value: list[np.ndarray] = []
        self.width = ctx.n_classes if ctx.is_classification else 1

    def new_node(self) -> int:
        self.feature.append(LEAF)
        self.threshold.append(np.nan)
        self.left.append(LEAF)
        self.right.append(LEAF)
        self.n_samples.append(0)
        self.value.append(np.zeros(self.width))
        return len(self.feature) - 1

    def make_leaf(self, node: int, idx: np.ndarray):
        self.n_samples[node] = idx.shape[0]
        self.value[node] = leaf_payload(self.ctx, idx)

    def finish(self) -> Tree:
        n = len(self.feature)
        return Tree(
            feature=np.array(self.feature, dtype=np.int64),
            threshold=np.array(self.threshold, dtype=np.float64),
            left=np.array(self.left, dtype=np.int64),
            right=np.array(self.right, dtype=np.int64),
            n_samples=np.array(self.n_samples, dtype=np.int64),
            value=np.array(self.value, dtype=np.float64).reshape(n, self.width),
            label=np.full(n, -1, dtype=np.int64),
            task=self.ctx.task,
            n_classes=self.ctx.n_classes,
        )


def leaf_payload(ctx: SplitContext, idx: np.ndarray) -> np.ndarray:
    ys = ctx.y[idx]
    if ctx.is_classification:
        return np.bincount(ys, minlength=ctx.n_classes).astype(np.float64)
    return np.array([ys.mean()])


def build_tree(ctx: SplitContext, sample_indices, params: HyperParams, strategy: Strategy,
               rng: np.random.Generator) -> Tree:
    """Grow one tree on ``sample_indices`` (duplicates allowed).

    A node becomes a leaf when it holds fewer than ``k_n`` samples, when it
    is pure (zero variance for regression), when the strategy finds no
    split, or when the chosen split would leave a child with fewer than
    ``k_n`` samples; in the last case the split is discarded.
    """
    idx = np.asarray(sample_indices, dtype=np.int64)
    if idx.shape[0] == 0:
        raise ValueError("cannot build a tree on an empty sample")
    k_n = params.k_n
    b = _Builder(ctx)
    # each pending node carries its samples presorted by every feature;
    # children inherit the order through a stable partition
    stack = [(b.new_node(), _kernels.presort(ctx.X, idx))]
    goes_left = np.zeros(ctx.X.shape[0], dtype=np.bool_)
    while stack:
        node, rows = stack.pop()
        cur = rows[0]
        if cur.shape[0] < k_n or ctx.is_pure(cur):
            b.make_leaf(node, cur)
            continue
        ctx.enter_node(cur, rows)
        split = strategy(ctx, cur, params, rng)
        ctx.enter_node(None, None)
        if split is None:
            b.make_leaf(node, cur)
            continue
        left_rows, right_rows = _kernels.partition_sorted(ctx.X[:, split.feature], rows, split.threshold,
                                                            goes_left)
        li, ri = left_rows[0], right_rows[0]
        if li.shape[0] < k_n or ri.shape[0] < k_n:
            ctx.counters["rejected"] += 1
            b.make_leaf(node, cur)
            continue
        lnode, rnode = b.new_node(), b.new_node()
        b.feature[node] = split.feature
        b.threshold[node] = split.threshold
        b.left[node] = lnode
        b.right[node] = rnode
        b.n_samples[node] = cur.shape[0]
        # right pushed first so the left subtree is grown first
        stack.append((rnode, right_rows))
        stack.append((lnode, left_rows))
    return b.finish()


def refill_leaves(tree: Tree, ctx: SplitContext, est_idx) -> Tree:
    """Replace leaf payloads with statistics of ``est_idx`` routed through ``tree``.

    Leaves that receive no estimation sample keep their current payload.
    """
    est_idx = np.asarray(est_idx, dtype=np.int64)
    if est_idx.shape[0] == 0:
        return tree
    leaf_of = tree.apply(ctx.X[est_idx])
    order = np.argsort(leaf_of, kind="stable")
    leaf_sorted = leaf_of[order]
    bounds = np.flatnonzero(np.diff(leaf_sorted)) + 1
    for grp in np.split(order, bounds):
        leaf = leaf_of[grp[0]]
        members = est_idx[grp]
        tree.value[leaf] = leaf_payload(ctx, members)
        tree.n_samples[leaf] = members.shape[0]
    return tree


def sample_leaf_labels(tree: Tree, rng) -> Tree:
    """Draw each leaf's label once from its class proportions."""
    for leaf in tree.leaves():
        counts = tree.value[leaf]
        tree.label[leaf] = sample_categorical(counts / counts.sum(), rng)
    return tree


def tree_predict_class(tree: Tree, x, rng) -> tuple[int, np.ndarray]:
    """Class prediction and leaf class distribution for one sample."""
    leaf = int(tree.apply(x)[0])
    counts = tree.value[leaf]
    gamma = counts / counts.sum()
    if tree.label[leaf] >= 0:
        return int(tree.label[leaf]), gamma
    return int(argmax_random_ties(counts[None, :], rng)[0]), gamma


def tree_predict_value(tree: Tree, x) -> float:
    return float(tree.value[int(tree.apply(x)[0]), 0])


def tree_from_node_records(records: list[dict], task: str, n_classes: int) -> Tree:
    n = len(records)
    width = n_classes if task == CLASSIFICATION else 1
    t = Tree(
        feature=np.full(n, LEAF, dtype=np.int64),
        threshold=np.full(n, np.nan),
        left=np.full(n, LEAF, dtype=np.int64),
        right=np.full(n, LEAF, dtype=np.int64),
        n_samples=np.zeros(n, dtype=np.int64),
        value=np.zeros((n, width)),
        label=np.full(n, -1, dtype=np.int64),
        task=task,
        n_classes=n_classes,
    )
    for i, rec in enumerate(records):
        if rec["id"] != i:
            raise ValueError(f"node record {i} has id {rec['id']}")
        t.n_samples[i] = rec["n"]
        if "split" in rec:
            s = rec["split"]
            t.feature[i] = s["feature"]
            t.threshold[i] = s["threshold"]
            t.left[i] = s["left"]
            t.right[i] = s["right"]
        else:
            leaf = rec["leaf"]
            if task == CLASSIFICATION:
                counts = leaf["counts"]
                if len(counts) != width:
                    raise ValueError("leaf counts length differs from class count")
                t.value[i] = counts
                t.label[i] = leaf.get("label", -1)
            else:
                t.value[i, 0] = leaf["mean"]
    internal = t.feature >= 0
    kids = np.concatenate([t.left[internal], t.right[internal]])
    if kids.size and (kids.min() <= 0 or kids.max() >= n):
        raise ValueError("child reference out of range")
    if kids.size != np.unique(kids).size or kids.size != n - 1:
        raise ValueError("node records do not form a tree")
    return t


def tree_to_node_records(t: Tree) -> list[dict]:
    out = []
    for i in range(t.n_nodes):
        rec = {"id": i, "n": int(t.n_samples[i])}
        if t.feature[i] >= 0:
            rec["split"] = {
                "feature": int(t.feature[i]),
                "threshold": float(t.threshold[i]),
                "left": int(t.left[i]),
                "right": int(t.right[i]),
            }
        elif t.task == CLASSIFICATION:
            leaf = {"counts": [float(c) for c in t.value[i]]}
            if t.label[i] >= 0:
                leaf["label"] = int(t.label[i])
            rec["leaf"] = leaf
        else:
            rec["leaf"] = {"mean": float(t.value[i, 0])}
        out.append(rec)
    return out
