import math

import numpy as np
import pytest

from helpers import make_classification, make_regression
from dmrf.data import EvalProtocol
from dmrf.evaluation import (benchmark, complexity_probe, consistency_experiment, kn_schedule, parameter_sweep,
                             run_benchmark, synthesize_classification, synthesize_regression)
from dmrf.evaluation.consistency import BAYES_RISK, bayes_classifier, conditional_error, regression_function
from dmrf.evaluation.stats import average_ranks
from dmrf.params import HyperParams

SMALL = HyperParams(M=5)


def test_grids():
    assert benchmark.P_GRID == (0.05, 0.15, 0.25, 0.35, 0.45, 0.55, 0.65, 0.75, 0.85, 0.95)
    assert benchmark.B_GRID == tuple(range(21))
    (a, va), (b, vb) = benchmark.sweep_grid("pq")
    assert (a, b, len(va) * len(vb)) == ("p", "q_n", 100)
    (a, va), (b, vb) = benchmark.sweep_grid("b")
    assert (a, b, len(va) * len(vb)) == ("B1", "B2", 441)
    with pytest.raises(ValueError):
        benchmark.sweep_grid("xy")


def test_sweep_row_count():
    ds = make_classification(n=80, seed=1)
    proto = EvalProtocol(repeats=2)
    one = parameter_sweep(ds, (("p", [0.5]), ("q_n", [0.6])), SMALL, proto)
    assert len(one) == 1
    grid = parameter_sweep(ds, (("B1", [0, 5, 10]), ("B2", [1, 2])), SMALL, proto)
    assert [(r.value1, r.value2) for r in grid] == [(a, b) for a in (0, 5, 10) for b in (1, 2)]
    assert benchmark.sweep_csv(grid).splitlines()[0] == "B1,B2,mean,std"
    assert len(benchmark.sweep_csv(grid).splitlines()) == 7


def test_benchmark_shape_and_insufficient_pairs():
    ds = make_classification(n=80, seed=2)
    rep = run_benchmark({"toy": ds}, ["dmrf", "brieman"], EvalProtocol(repeats=2), SMALL)
    assert set(rep.ranks) == {"dmrf", "brieman"}
    assert sorted(rep.ranks.values()) in ([1.0, 2.0], [1.5, 1.5])
    per_dataset = [t for t in rep.tests if t.scope == "toy"]
    assert len(per_dataset) == 1 and "insufficient pairs" in per_dataset[0].note
    assert all(len(v) == 2 for v in rep.scores["toy"].values())
    text = rep.to_text()
    assert "Average rank" in text and "DMRF" in text and "BriemanRF" in text
    csv_lines = rep.to_csv().splitlines()
    assert len(csv_lines) == 1 + 2 + 2


def test_benchmark_deterministic():
    ds = make_regression(n=80, seed=3)
    proto = EvalProtocol(repeats=3, master_seed=9)
    a = run_benchmark({"r": ds}, ["dmrf", "brieman"], proto, SMALL)
    b = run_benchmark({"r": ds}, ["dmrf", "brieman"], proto, SMALL)
    assert a.to_json() == b.to_json()
    assert a.metric == "mse"


def test_ranks_recompute_from_report():
    dss = {f"d{i}": make_classification(n=70, seed=10 + i) for i in range(3)}
    rep = run_benchmark(dss, ["dmrf", "brieman", "mrf-b"], EvalProtocol(repeats=2), SMALL)
    expected = average_ranks(rep.mean_table(), True)
    assert [rep.ranks[v] for v in rep.variants] == expected.tolist()


def test_markers_follow_tests():
    rep = benchmark.BenchmarkReport("classification", "accuracy", ["d"], ["dmrf", "brieman"],
                                    {"d": {"dmrf": [0.9] * 6, "brieman": [0.8] * 6}})
    rep.tests = [benchmark.PairTest("dmrf", "brieman", "d", 0.03, True, "dmrf")]
    assert rep.marker("d", "dmrf") == "*" and rep.marker("d", "brieman") == ""
    rep.tests = [benchmark.PairTest("dmrf", "brieman", "d", 0.03, True, "brieman")]
    assert rep.marker("d", "brieman") == "#" and rep.marker("d", "dmrf") == ""


def test_cell_seed_independent_of_other_cells():
    s = benchmark.cell_seed(0, "a", "dmrf", 1)
    assert s == benchmark.cell_seed(0, "a", "dmrf", 1)
    assert s != benchmark.cell_seed(0, "a", "brieman", 1)
    assert s != benchmark.cell_seed(1, "a", "dmrf", 1)


def test_mixed_tasks_rejected():
    with pytest.raises(ValueError):
        run_benchmark({"a": make_classification(), "b": make_regression()}, ["dmrf"], EvalProtocol(repeats=1))


# -- synthetic distributions ----------------------------------------------

def test_bayes_error_on_fresh_draw():
    ds = synthesize_classification(100_000, seed=1)
    err = np.mean(bayes_classifier(ds.features) != ds.labels)
    assert abs(err - BAYES_RISK) <= 0.004


def test_classification_marginal_and_determinism():
    ds = synthesize_classification(20_000, seed=2)
    assert abs(ds.labels.mean() - 0.5) <= 3 * 0.5 / math.sqrt(20_000)
    again = synthesize_classification(20_000, seed=2)
    assert np.array_equal(ds.features, again.features) and np.array_equal(ds.labels, again.labels)


def test_regression_generator():
    ds = synthesize_regression(20_000, 0.5, seed=3)
    sd = math.sqrt(2 / 12 + 0.25)
    assert abs(ds.labels.mean() - 1.0) <= 3 * sd / math.sqrt(20_000)
    clean = synthesize_regression(50, 0.0, seed=4)
    np.testing.assert_array_equal(clean.labels, regression_function(clean.features))
    assert np.array_equal(synthesize_regression(50, 0.5, 5).labels, synthesize_regression(50, 0.5, 5).labels)


def test_conditional_error_of_bayes_rule():
    X = np.random.default_rng(0).random((1000, 2))
    assert np.allclose(conditional_error(bayes_classifier(X), X), 0.2)


def test_kn_schedule():
    assert kn_schedule(32000) == math.ceil(math.log(32000) ** 2) == 108
    assert [kn_schedule(n) for n in (10, 500, 2000)] == [math.ceil(math.log(n) ** 2) for n in (10, 500, 2000)]
    ns = [500, 2000, 8000, 32000]
    ratios_log = [kn_schedule(n) / math.log(n) for n in ns]
    ratios_n = [kn_schedule(n) / n for n in ns]
    assert ratios_log == sorted(ratios_log) and ratios_n == sorted(ratios_n, reverse=True)


def test_noise_increases_regression_risk():
    params = HyperParams(M=20)
    clean = consistency_experiment("regression", [10_000], params, n_test=20_000, noise_sd=0.0)
    noisy = consistency_experiment("regression", [10_000], params, n_test=20_000, noise_sd=0.5)
    assert clean.points[0].risk < noisy.points[0].risk


def test_classification_curve_respects_bayes_floor():
    curve = consistency_experiment("classification", [500, 2000], HyperParams(M=10), n_test=20_000)
    assert [p.k_n for p in curve.points] == [39, 58]
    for p in curve.points:
        assert p.risk >= BAYES_RISK - 3 * p.mc_se
        assert p.gap == pytest.approx(abs(p.risk - BAYES_RISK))
    assert curve.to_csv().splitlines()[0] == "n,k_n,risk,target,gap,mc_se"


def test_complexity_probe_rows():
    rows = complexity_probe([500, 1000], HyperParams(M=2), runs=1)
    assert [r.n for r in rows] == [500, 1000]
    assert rows[0].ratio_to_previous is None and rows[1].ratio_to_previous > 0
