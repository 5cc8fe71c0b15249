"""Forest training, aggregation and model documents."""
from __future__ import annotations

import datetime as _dt
import json
from collections import Counter
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from joblib import Parallel, delayed

from .data import CLASSIFICATION, Dataset, Schema
from .params import HyperParams
from .splitting import SplitContext, select_split_dmrf
from .tree import (Tree, argmax_random_ties, build_tree, tree_from_node_records,
                   tree_to_node_records)

FORMAT_NAME = "dmrf-forest"
FORMAT_VERSION = 1
MAX_BOOTSTRAP_ATTEMPTS = 10**6
_SEED_MASK = (1 << 64) - 1
# spawn-key namespace for prediction streams, disjoint from tree indices
_PREDICT_KEY = 1 << 40


class ModelFormatError(ValueError):
    """Raised for unreadable, truncated or incompatible model documents."""


def tree_rng(seed: int, index: int) -> np.random.Generator:
    """Independent stream for tree ``index``, a pure function of (seed, index)."""
    return np.random.default_rng(np.random.SeedSequence(seed & _SEED_MASK, spawn_key=(index,)))


def bernoulli_bootstrap(n: int, q_n: float, rng) -> np.ndarray:
    """Keep each of ``n`` indices independently with probability ``q_n``.

    Empty draws are redrawn.
    """
    if n < 1:
        raise ValueError("need n >= 1")
    if not 0.0 < q_n <= 1.0:
        raise ValueError("q_n must lie in (0, 1]")
    if q_n >= 1.0:
        return np.arange(n, dtype=np.int64)
    for _ in range(MAX_BOOTSTRAP_ATTEMPTS):
        idx = np.flatnonzero(rng.random(n) < q_n)
        if idx.shape[0] > 0:
            return idx.astype(np.int64)
    raise RuntimeError(f"bootstrap stayed empty after {MAX_BOOTSTRAP_ATTEMPTS} attempts")


@dataclass
class ForestModel:
    task: str
    trees: list[Tree]
    params: HyperParams
    n_features: int
    n_classes: int = 0
    schema: Optional[Schema] = None
    provenance: dict = field(default_factory=dict)
    keys: list[int] = field(default_factory=list)
    train_counters: Counter = field(default_factory=Counter)

    def __post_init__(self):
        if not self.keys:
            self.keys = list(range(len(self.trees)))
        if len(self.keys) != len(self.trees):
            raise ValueError("one key per tree required")

    @property
    def is_classification(self) -> bool:
        return self.task == CLASSIFICATION

    def prediction_rng(self) -> np.random.Generator:
        return tree_rng(self.params.seed, _PREDICT_KEY)

    def _check(self, X, want_classification: bool) -> np.ndarray:
        if self.is_classification != want_classification:
            raise TypeError(f"model task is {self.task}")
        X = np.asarray(X, dtype=np.float64)
        if X.ndim == 1:
            X = X[None, :]
        if X.shape[1] != self.n_features:
            raise ValueError(f"model expects {self.n_features} features, input has {X.shape[1]}")
        return X

    def votes(self, X, rng=None) -> np.ndarray:
        """``(n, c)`` matrix of tree votes.

        Each tree breaks its own leaf ties with a stream keyed by the tree, so
        the counts do not depend on the order of ``trees``.
        """
        X = self._check(X, True)
        rng = self.prediction_rng() if rng is None else rng
        base = int(rng.integers(0, 1 << 63))
        votes = np.zeros((X.shape[0], self.n_classes), dtype=np.int64)
        rows = np.arange(X.shape[0])
        for key, t in zip(self.keys, self.trees):
            pred = t.predict_class(X, tree_rng(base, key))
            np.add.at(votes, (rows, pred), 1)
        return votes

    def predict_class(self, X, rng=None) -> np.ndarray:
        rng = self.prediction_rng() if rng is None else rng
        votes = self.votes(X, rng)
        return argmax_random_ties(votes, rng)

    def predict_proba(self, X) -> np.ndarray:
        """Mean over trees of the leaf class distributions."""
        X = self._check(X, True)
        acc = np.zeros((X.shape[0], self.n_classes))
        for t in self._ordered_trees():
            acc += t.leaf_distribution(X)
        return acc / len(self.trees)

    def predict_value(self, X) -> np.ndarray:
        X = self._check(X, False)
        P = np.stack([t.predict_value(X) for t in self.trees])
        # sorting per row makes the sum independent of tree order
        return np.sort(P, axis=0).mean(axis=0)

    def predict(self, X, rng=None) -> np.ndarray:
        if self.is_classification:
            return self.predict_class(X, rng)
        return self.predict_value(X)

    def _ordered_trees(self):
        return [t for _, t in sorted(zip(self.keys, self.trees), key=lambda kt: kt[0])]


def forest_predict_class(f: ForestModel, x, rng=None) -> int:
    return int(f.predict_class(x, rng)[0])


def forest_predict_value(f: ForestModel, x) -> float:
    return float(f.predict_value(x)[0])


def _grow_dmrf(X, y, task, n_classes, params: HyperParams, index: int):
    rng = tree_rng(params.seed, index)
    ctx = SplitContext(X, y, task, n_classes, params.weighted_mse_reduction)
    idx = bernoulli_bootstrap(X.shape[0], params.q_n, rng)
    tree = build_tree(ctx, idx, params, select_split_dmrf, rng)
    return tree, ctx.counters


def grow_trees(ds: Dataset, params: HyperParams, grow_one, workers: int = 1):
    """Run ``grow_one`` for every tree index, serially or on a process pool.

    Results are returned in tree order and do not depend on ``workers``.
    """
    args = (ds.features, ds.labels, ds.task, ds.n_classes, params)
    if workers is None or workers <= 1:
        results = [grow_one(*args, i) for i in range(params.M)]
    else:
        results = Parallel(n_jobs=workers, backend="loky")(
            delayed(grow_one)(*args, i) for i in range(params.M))
    trees = [r[0] for r in results]
    counters = Counter()
    for r in results:
        counters.update(r[1])
    return trees, counters


def assemble(ds: Dataset, params: HyperParams, trees, counters, stamp: bool = False) -> ForestModel:
    prov = {"dataset_sha256": ds.fingerprint(), "n_train": ds.n_samples, "built_at": None}
    if stamp:
        prov["built_at"] = _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")
    return ForestModel(ds.task, trees, params, ds.n_features, ds.n_classes, ds.schema, prov,
                       train_counters=counters)


def train_forest(ds: Dataset, params: HyperParams = HyperParams(), workers: int = 1,
                 stamp: bool = False) -> ForestModel:
    """Train the forest selected by ``params.variant`` (DMRF by default)."""
    if ds.n_samples < 1:
        raise ValueError("dataset is empty")
    if ds.is_classification and ds.n_classes < 2:
        raise ValueError("classification needs at least two classes")
    if params.variant == "dmrf":
        grow = _grow_dmrf
    else:
        from .baselines import grower_for
        grow = grower_for(params.variant)
    trees, counters = grow_trees(ds, params, grow, workers)
    return assemble(ds, params, trees, counters, stamp)


def model_to_dict(f: ForestModel) -> dict:
    return {
        "format": FORMAT_NAME,
        "version": FORMAT_VERSION,
        "task": f.task,
        "n_features": f.n_features,
        "n_classes": f.n_classes,
        "params": f.params.to_dict(),
        "schema": f.schema.to_dict() if f.schema is not None else None,
        "provenance": dict(f.provenance),
        "trees": [{"key": k, "nodes": tree_to_node_records(t)} for k, t in zip(f.keys, f.trees)],
    }


def save_model(f: ForestModel, path=None) -> str:
    """Serialize to a JSON document with stable key order.

    Floats are written with their shortest round-tripping repr, so loading
    restores every threshold and leaf value bit for bit.
    """
    doc = json.dumps(model_to_dict(f), sort_keys=True, separators=(",", ":"), allow_nan=False)
    if path is not None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(doc)
            fh.write("\n")
    return doc


def load_model(document: str) -> ForestModel:
    if not document or not document.strip():
        raise ModelFormatError("empty model document")
    try:
        d = json.loads(document)
    except json.JSONDecodeError as e:
        raise ModelFormatError(f"corrupted model document: {e}") from None
    if not isinstance(d, dict) or d.get("format") != FORMAT_NAME:
        raise ModelFormatError("not a forest model document")
    if d.get("version") != FORMAT_VERSION:
        raise ModelFormatError(f"unsupported model version {d.get('version')!r}; expected {FORMAT_VERSION}")
    try:
        params = HyperParams.from_dict(d["params"])
        task = d["task"]
        n_classes = int(d["n_classes"])
        trees = [tree_from_node_records(t["nodes"], task, n_classes) for t in d["trees"]]
        keys = [int(t["key"]) for t in d["trees"]]
        if len(trees) != params.M:
            raise ModelFormatError(f"document holds {len(trees)} trees, params say {params.M}")
        schema = Schema.from_dict(d["schema"]) if d.get("schema") else None
        return ForestModel(task, trees, params, int(d["n_features"]), n_classes, schema,
                           dict(d.get("provenance", {})), keys)
    except ModelFormatError:
        raise
    except (KeyError, TypeError, ValueError) as e:
        raise ModelFormatError(f"invalid model document: {e}") from None


def load_model_file(path) -> ForestModel:
    with open(path, encoding="utf-8") as fh:
        return load_model(fh.read())
