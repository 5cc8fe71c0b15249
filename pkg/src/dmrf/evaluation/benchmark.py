"""Repeated-split benchmarks, significance markers and hyperparameter sweeps."""
from __future__ import annotations

import json
import zlib
from dataclasses import dataclass, field

import numpy as np
from joblib import Parallel, delayed

from ..baselines import VariantSpec
from ..data import Dataset, EvalProtocol, make_partitions
from ..forest import train_forest
from ..params import HyperParams
from .stats import InsufficientPairsError, accuracy, average_ranks, mean_squared_error, wilcoxon_signed_rank

REFERENCE = "brieman"
FOCUS = "dmrf"


def cell_seed(master_seed: int, dataset: str, variant: str, repeat: int) -> int:
    """Forest seed for one (dataset, variant, repeat) cell.

    Keyed by names rather than positions so adding a dataset or variant
    leaves every other cell unchanged.
    """
    key = (zlib.crc32(dataset.encode()), zlib.crc32(variant.encode()), int(repeat))
    ss = np.random.SeedSequence(master_seed & ((1 << 64) - 1), spawn_key=key)
    return int(ss.generate_state(1, np.uint64)[0] >> np.uint64(1))


def score(ds: Dataset, train_idx, test_idx, params: HyperParams) -> float:
    """Accuracy (classification) or MSE (regression) of one fitted forest."""
    model = train_forest(ds.subset(train_idx), params)
    test = ds.subset(test_idx)
    if ds.is_classification:
        return accuracy(model.predict_class(test.features), test.labels)
    return mean_squared_error(model.predict_value(test.features), test.labels)


def _run_cell(ds, train_idx, test_idx, params):
    return score(ds, train_idx, test_idx, params)


@dataclass
class PairTest:
    variant: str
    reference: str
    scope: str  # dataset name, or "all" for the across-dataset test
    p_value: float | None
    significant: bool
    better: str | None  # variant name judged better when significant
    note: str = ""


@dataclass
class BenchmarkReport:
    task: str
    metric: str
    datasets: list[str]
    variants: list[str]
    scores: dict[str, dict[str, list[float]]]
    ranks: dict[str, float] = field(default_factory=dict)
    tests: list[PairTest] = field(default_factory=list)
    protocol: dict = field(default_factory=dict)
    params: dict = field(default_factory=dict)

    @property
    def higher_is_better(self) -> bool:
        return self.metric == "accuracy"

    def mean(self, dataset: str, variant: str) -> float:
        return float(np.mean(self.scores[dataset][variant]))

    def std(self, dataset: str, variant: str) -> float:
        s = self.scores[dataset][variant]
        return float(np.std(s, ddof=1)) if len(s) > 1 else 0.0

    def mean_table(self) -> np.ndarray:
        return np.array([[self.mean(d, v) for v in self.variants] for d in self.datasets])

    def recompute_ranks(self) -> dict[str, float]:
        r = average_ranks(self.mean_table(), self.higher_is_better)
        return {v: float(x) for v, x in zip(self.variants, r)}

    def marker(self, dataset: str, variant: str) -> str:
        """``*`` on the focus model when it is significantly better than the
        reference, ``#`` on the reference when it is significantly better."""
        for t in self.tests:
            if t.scope != dataset or not t.significant or t.variant != FOCUS:
                continue
            if variant == t.variant and t.better == t.variant:
                return "*"
            if variant == t.reference and t.better == t.reference:
                return "#"
        return ""

    def _display(self, x: float) -> str:
        return f"{100 * x:.2f}" if self.higher_is_better else f"{x:.4g}"

    def to_csv(self) -> str:
        lines = ["dataset,variant,mean,std,repeats,marker"]
        for d in self.datasets:
            for v in self.variants:
                lines.append(f"{d},{v},{self.mean(d, v)!r},{self.std(d, v)!r},"
                             f"{len(self.scores[d][v])},{self.marker(d, v)}")
        for v in self.variants:
            lines.append(f"average rank,{v},{self.ranks[v]!r},,,")
        return "\n".join(lines) + "\n"

    def tests_csv(self) -> str:
        lines = ["scope,variant,reference,p_value,significant,better,note"]
        for t in self.tests:
            p = "" if t.p_value is None else repr(t.p_value)
            lines.append(f"{t.scope},{t.variant},{t.reference},{p},{int(t.significant)},{t.better or ''},{t.note}")
        return "\n".join(lines) + "\n"

    def to_text(self) -> str:
        heads = [VariantSpec.parse(v).label for v in self.variants]
        unit = "(%)" if self.higher_is_better else ""
        rows = [[f"Datasets {self.metric}{unit}"] + heads]
        for d in self.datasets:
            rows.append([d] + [self._display(self.mean(d, v)) + self.marker(d, v) for v in self.variants])
        rows.append(["Average rank"] + [f"{self.ranks[v]:.2f}" for v in self.variants])
        widths = [max(len(r[i]) for r in rows) for i in range(len(rows[0]))]
        out = ["  ".join(c.ljust(w) for c, w in zip(r, widths)).rstrip() for r in rows]
        legend = (f'"*": {FOCUS} significantly better than {REFERENCE}; '
                  f'"#": {REFERENCE} significantly better (Wilcoxon signed-rank over repeats, alpha=0.05)')
        return "\n".join(out + ["", legend]) + "\n"

    def to_dict(self) -> dict:
        return {
            "task": self.task,
            "metric": self.metric,
            "datasets": self.datasets,
            "variants": self.variants,
            "scores": self.scores,
            "ranks": self.ranks,
            "tests": [t.__dict__ for t in self.tests],
            "protocol": self.protocol,
            "params": self.params,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=1)


def _pair_test(a, b, variant, reference, scope, higher_is_better) -> PairTest:
    try:
        res = wilcoxon_signed_rank(a, b)
    except InsufficientPairsError as e:
        return PairTest(variant, reference, scope, None, False, None, f"insufficient pairs: {e}")
    better = None
    if res.significant:
        a_larger = res.direction > 0
        better = variant if a_larger == higher_is_better else reference
    return PairTest(variant, reference, scope, res.p_value, res.significant, better)


def run_benchmark(datasets: dict[str, Dataset], variants, proto: EvalProtocol = EvalProtocol(),
                  params: HyperParams = HyperParams(), workers: int = 1, reference: str = REFERENCE) -> BenchmarkReport:
    """Train every variant on every repeat partition of every dataset.

    All variants see the same partitions of a dataset. Cells run in parallel
    when ``workers > 1``; each cell's forest seed comes from
    :func:`cell_seed`, so the report does not depend on scheduling.
    """
    variants = [VariantSpec.parse(v).name for v in variants]
    tasks = {ds.task for ds in datasets.values()}
    if len(tasks) != 1:
        raise ValueError("all datasets in one report must share a task")
    task = tasks.pop()
    jobs, keys = [], []
    for dname, ds in datasets.items():
        parts = make_partitions(ds, proto)
        for r, (tr, te) in enumerate(parts):
            for v in variants:
                p = params.replace(variant=v, seed=cell_seed(proto.master_seed, dname, v, r))
                jobs.append((ds, tr, te, p))
                keys.append((dname, v))
    if workers and workers > 1:
        results = Parallel(n_jobs=workers, backend="loky")(delayed(_run_cell)(*j) for j in jobs)
    else:
        results = [_run_cell(*j) for j in jobs]
    scores = {d: {v: [] for v in variants} for d in datasets}
    for (d, v), s in zip(keys, results):
        scores[d][v].append(float(s))

    metric = "accuracy" if task == "classification" else "mse"
    report = BenchmarkReport(task, metric, list(datasets), variants, scores,
                             protocol=proto.__dict__.copy(), params=params.to_dict())
    report.ranks = report.recompute_ranks()
    hib = report.higher_is_better
    if reference in variants:
        for v in variants:
            if v == reference:
                continue
            for d in datasets:
                report.tests.append(_pair_test(scores[d][v], scores[d][reference], v, reference, d, hib))
            means_v = [report.mean(d, v) for d in datasets]
            means_r = [report.mean(d, reference) for d in datasets]
            report.tests.append(_pair_test(means_v, means_r, v, reference, "all", hib))
    return report


P_GRID = tuple(round(0.05 + 0.1 * i, 2) for i in range(10))
B_GRID = tuple(range(21))


@dataclass
class SweepRow:
    param1: str
    value1: float
    param2: str
    value2: float
    mean: float
    std: float


def sweep_grid(kind: str):
    """``pq``: p and q_n over 0.05..0.95 step 0.1; ``b``: B1 and B2 over integers 0..20."""
    if kind == "pq":
        return ("p", P_GRID), ("q_n", P_GRID)
    if kind == "b":
        return ("B1", B_GRID), ("B2", B_GRID)
    raise ValueError(f"unknown grid {kind!r}; use 'pq' or 'b'")


def parameter_sweep(ds: Dataset, grid, params: HyperParams = HyperParams(), proto: EvalProtocol = EvalProtocol(),
                    workers: int = 1, name: str = "data") -> list[SweepRow]:
    """Mean metric of DMRF over a two-parameter grid, one row per grid cell.

    ``grid`` is ``"pq"``, ``"b"`` or an explicit pair
    ``((name1, values1), (name2, values2))``.
    """
    (n1, v1), (n2, v2) = sweep_grid(grid) if isinstance(grid, str) else grid
    parts = make_partitions(ds, proto)
    jobs, cells = [], []
    for a in v1:
        for b in v2:
            cell = f"{n1}={a},{n2}={b}"
            for r, (tr, te) in enumerate(parts):
                p = params.replace(variant="dmrf", **{n1: a, n2: b},
                                   seed=cell_seed(proto.master_seed, name, cell, r))
                jobs.append((ds, tr, te, p))
            cells.append((a, b))
    if workers and workers > 1:
        results = Parallel(n_jobs=workers, backend="loky")(delayed(_run_cell)(*j) for j in jobs)
    else:
        results = [_run_cell(*j) for j in jobs]
    k = len(parts)
    rows = []
    for i, (a, b) in enumerate(cells):
        s = np.array(results[i * k:(i + 1) * k])
        rows.append(SweepRow(n1, float(a), n2, float(b), float(s.mean()), float(s.std(ddof=1)) if k > 1 else 0.0))
    return rows


def sweep_csv(rows: list[SweepRow]) -> str:
    if not rows:
        return "param1,value1,param2,value2,mean,std\n"
    lines = [f"{rows[0].param1},{rows[0].param2},mean,std"]
    for r in rows:
        lines.append(f"{r.value1!r},{r.value2!r},{r.mean!r},{r.std!r}")
    return "\n".join(lines) + "\n"
