import itertools
from collections import Counter
from fractions import Fraction

import numpy as np
import scipy.stats

from dmrf.data import CLASSIFICATION, REGRESSION, Dataset
from dmrf.splitting import SplitPoint


def make_classification(n=120, d=4, n_classes=2, seed=0, noise=0.1) -> Dataset:
    rng = np.random.default_rng(seed)
    X = rng.random((n, d))
    score = X[:, 0] + 0.5 * X[:, 1 % d]
    edges = np.quantile(score, np.linspace(0, 1, n_classes + 1)[1:-1])
    y = np.searchsorted(edges, score)
    flip = rng.random(n) < noise
    y[flip] = rng.integers(0, n_classes, flip.sum())
    # every class present so n_classes is honest
    y[:n_classes] = np.arange(n_classes)
    return Dataset(X, y.astype(np.int64), CLASSIFICATION, n_classes=n_classes)


def make_regression(n=120, d=3, seed=0, noise=0.1) -> Dataset:
    rng = np.random.default_rng(seed)
    X = rng.random((n, d))
    y = X[:, 0] * 2 + np.sin(3 * X[:, 1 % d]) + noise * rng.standard_normal(n)
    return Dataset(X, y, REGRESSION)


# -- oracles ---------------------------------------------------------------

def exact_gini(labels, n_classes):
    n = len(labels)
    c = Counter(labels)
    return 1 - sum(Fraction(c[k], n) ** 2 for k in range(n_classes))


def brute_force_best(X, y, idx, features, n_classes):
    """Exhaustive double loop in exact arithmetic; ties to (lowest feature, lowest threshold)."""
    labels = [int(y[i]) for i in idx]
    parent = exact_gini(labels, n_classes)
    n = len(idx)
    best = None
    for j in sorted(features):
        vals = sorted({float(X[i, j]) for i in idx})
        for t in vals[:-1]:
            left = [int(y[i]) for i in idx if X[i, j] <= t]
            right = [int(y[i]) for i in idx if X[i, j] > t]
            red = (parent - Fraction(len(left), n) * exact_gini(left, n_classes)
                   - Fraction(len(right), n) * exact_gini(right, n_classes))
            if best is None or red > best[0]:
                best = (red, j, t)
    return None if best is None else SplitPoint(best[1], best[2])


def enumerate_p(a, b):
    """Two-sided exact p-value by listing all 2^n sign assignments."""
    d = np.asarray(a, float) - np.asarray(b, float)
    d = d[d != 0]
    ranks = scipy.stats.rankdata(np.abs(d))
    observed = ranks[d > 0].sum()
    total = ranks.sum()
    sums = [sum(r for r, s in zip(ranks, signs) if s) for signs in itertools.product((0, 1), repeat=len(d))]
    sums = np.array(sums)
    lo = np.sum(sums <= observed + 1e-9)
    hi = np.sum(sums >= observed - 1e-9)
    assert total > 0
    return min(1.0, 2 * min(lo, hi) / len(sums))
