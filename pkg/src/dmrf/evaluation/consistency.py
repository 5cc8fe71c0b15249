"""Synthetic distributions with known optimum, risk curves and timing probes."""
from __future__ import annotations

import math
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from ..data import CLASSIFICATION, REGRESSION, Dataset
from ..forest import train_forest
from ..params import HyperParams

BAYES_RISK = 0.2
_ETA_HIGH = 0.8


def _rng(seed: int, *key: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=key))


def bayes_classifier(X) -> np.ndarray:
    X = np.asarray(X)
    return (X[:, 0] + X[:, 1] > 1.0).astype(np.int64)


def class_posterior(X) -> np.ndarray:
    """P(Y = 1 | X) of the synthetic classification distribution."""
    return np.where(bayes_classifier(X) == 1, _ETA_HIGH, 1.0 - _ETA_HIGH)


def synthesize_classification(n: int, seed: int = 0) -> Dataset:
    """X ~ U[0,1]^2, P(Y=1|X) = 0.8 above the anti-diagonal and 0.2 below; L* = 0.2."""
    rng = np.random.default_rng(seed)
    X = rng.random((n, 2))
    y = (rng.random(n) < class_posterior(X)).astype(np.int64)
    return Dataset(X, y, CLASSIFICATION, n_classes=2)


def regression_function(X) -> np.ndarray:
    X = np.asarray(X)
    return X[:, 0] + X[:, 1]


def synthesize_regression(n: int, noise_sd: float = 0.0, seed: int = 0) -> Dataset:
    """X ~ U[0,1]^2, Y = x1 + x2 + N(0, sd^2)."""
    rng = np.random.default_rng(seed)
    X = rng.random((n, 2))
    y = regression_function(X)
    if noise_sd > 0:
        y = y + rng.normal(0.0, noise_sd, n)
    return Dataset(X, y, REGRESSION)


def kn_schedule(n: int) -> int:
    """Minimum node size growing like log(n)^2, never below 5."""
    return max(5, math.ceil(math.log(n) ** 2))


@dataclass
class CurvePoint:
    n: int
    k_n: int
    risk: float
    target: float
    gap: float
    mc_se: float


@dataclass
class ConsistencyCurve:
    task: str
    noise_sd: float
    points: list[CurvePoint] = field(default_factory=list)

    def to_rows(self) -> list[dict]:
        return [asdict(p) for p in self.points]

    def to_csv(self) -> str:
        lines = ["n,k_n,risk,target,gap,mc_se"]
        for p in self.points:
            lines.append(f"{p.n},{p.k_n},{p.risk!r},{p.target!r},{p.gap!r},{p.mc_se!r}")
        return "\n".join(lines) + "\n"


def conditional_error(pred, X) -> np.ndarray:
    """P(g(X) != Y | X) for the synthetic classification distribution."""
    eta = class_posterior(X)
    return np.where(np.asarray(pred) == 1, 1.0 - eta, eta)


def consistency_experiment(task: str, schedule, params: HyperParams = HyperParams(), n_test: int = 100_000,
                           noise_sd: float = 0.0, seed: int = 0, workers: int = 1) -> ConsistencyCurve:
    """Risk of DMRF trained at each sample size of ``schedule``.

    ``k_n`` follows :func:`kn_schedule`. Classification risk is the exact
    conditional error averaged over a fresh test draw, which has lower
    variance than counting label mismatches; regression risk is the mean
    squared distance to the true regression function.
    """
    curve = ConsistencyCurve(task, noise_sd)
    for n in schedule:
        n = int(n)
        k_n = kn_schedule(n)
        p = params.replace(k_n=k_n, variant="dmrf")
        train_seed = int(_rng(seed, n, 0).integers(1 << 62))
        test_seed = int(_rng(seed, n, 1).integers(1 << 62))
        if task == CLASSIFICATION:
            ds = synthesize_classification(n, train_seed)
            test = synthesize_classification(n_test, test_seed)
            model = train_forest(ds, p, workers)
            err = conditional_error(model.predict_class(test.features), test.features)
            risk, target = float(err.mean()), BAYES_RISK
            mc_se = float(err.std(ddof=1) / math.sqrt(n_test))
        else:
            ds = synthesize_regression(n, noise_sd, train_seed)
            test = synthesize_regression(n_test, 0.0, test_seed)
            model = train_forest(ds, p, workers)
            sq = (model.predict_value(test.features) - regression_function(test.features)) ** 2
            risk, target = float(sq.mean()), 0.0
            mc_se = float(sq.std(ddof=1) / math.sqrt(n_test))
        curve.points.append(CurvePoint(n, k_n, risk, target, abs(risk - target), mc_se))
    return curve


@dataclass
class TimingRow:
    n: int
    n_features: int
    M: int
    p: float
    seconds_per_tree: float
    ratio_to_previous: float | None


def _probe_data(n: int, d: int, seed: int) -> Dataset:
    rng = np.random.default_rng(seed)
    X = rng.random((n, d))
    y = (X[:, 0] + X[:, 1 % d] + 0.3 * rng.standard_normal(n) > 1.0).astype(np.int64)
    return Dataset(X, y, CLASSIFICATION, n_classes=2)


def _timed_tree_seconds(ds: Dataset, params: HyperParams) -> float:
    t0 = time.perf_counter()
    train_forest(ds, params, workers=1)
    return (time.perf_counter() - t0) / params.M


def time_per_tree(n: int, params: HyperParams, n_features: int = 10, runs: int = 5, seed: int = 0) -> float:
    """Median over ``runs`` of single-worker training wall time divided by M."""
    ds = _probe_data(n, n_features, seed)
    return float(np.median([_timed_tree_seconds(ds, params.replace(seed=params.seed + r)) for r in range(runs)]))


def complexity_probe(n_values, params: HyperParams = HyperParams(M=10), n_features: int = 10,
                     runs: int = 5, seed: int = 0) -> list[TimingRow]:
    """Per-tree training time at each n, with the ratio to the previous n.

    Runs are interleaved across sizes (round r times every n once) so slow
    drift in machine speed hits all sizes alike instead of skewing a ratio.
    """
    # warm the compiled kernels so the first timing is not a compile
    train_forest(_probe_data(200, n_features, seed), params.replace(M=1))
    sizes = [int(n) for n in n_values]
    data = {n: _probe_data(n, n_features, seed) for n in sizes}
    times = {n: [] for n in sizes}
    for r in range(runs):
        for n in sizes:
            times[n].append(_timed_tree_seconds(data[n], params.replace(seed=params.seed + r)))
    rows = []
    prev = None
    for n in sizes:
        t = float(np.median(times[n]))
        rows.append(TimingRow(n, n_features, params.M, params.p, t, None if prev is None else t / prev))
        prev = t
    return rows
