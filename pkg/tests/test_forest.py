import math
import random

import numpy as np
import pytest

from helpers import make_classification, make_regression
from dmrf.data import CLASSIFICATION, REGRESSION, DataError, Dataset
from dmrf.forest import (ForestModel, ModelFormatError, bernoulli_bootstrap, forest_predict_class, forest_predict_value,
                         load_model, save_model, train_forest)
from dmrf.params import HyperParams
from dmrf.tree import Tree


def leaf(value, task=CLASSIFICATION, n_classes=2):
    return Tree(np.array([-1]), np.array([np.nan]), np.array([-1]), np.array([-1]), np.array([1]),
                np.array([value], dtype=float), np.array([-1]), task, n_classes)


def forest_of(trees, task=CLASSIFICATION, n_classes=2):
    return ForestModel(task, trees, HyperParams(M=len(trees)), 1, n_classes)


def test_bootstrap_full_inclusion():
    assert bernoulli_bootstrap(7, 1.0, np.random.default_rng(0)).tolist() == list(range(7))


def test_bootstrap_never_empty():
    rng = np.random.default_rng(0)
    assert all(bernoulli_bootstrap(1, 0.01, rng).tolist() == [0] for _ in range(50))


def test_bootstrap_size_band():
    q = 1 - 1 / math.e
    sd = math.sqrt(1000 * q * (1 - q))
    rng = np.random.default_rng(0)
    sizes = [bernoulli_bootstrap(1000, q, rng).shape[0] for _ in range(500)]
    assert all(abs(s - 1000 * q) <= 3.5 * sd for s in sizes)
    assert abs(np.mean(sizes) - 1000 * q) <= 3 * sd / math.sqrt(500)


def test_bootstrap_marginal_inclusion():
    rng = np.random.default_rng(1)
    q, draws = 0.3, 4000
    hits = np.zeros(20)
    for _ in range(draws):
        hits[bernoulli_bootstrap(20, q, rng)] += 1
    sd = math.sqrt(q * (1 - q) / draws)
    assert np.all(np.abs(hits / draws - q) <= 4 * sd)


def test_bootstrap_errors():
    with pytest.raises(ValueError):
        bernoulli_bootstrap(0, 0.5, np.random.default_rng(0))
    with pytest.raises(ValueError):
        bernoulli_bootstrap(5, 0.0, np.random.default_rng(0))


def test_vote_majority():
    f = forest_of([leaf([0, 1]), leaf([0, 1]), leaf([1, 0])])
    assert forest_predict_class(f, [0.0]) == 1


def test_vote_tie_is_fair():
    f = forest_of([leaf([0, 1]), leaf([1, 0])])
    rng = np.random.default_rng(3)
    ones = sum(forest_predict_class(f, [0.0], rng) for _ in range(10_000))
    assert abs(ones / 10_000 - 0.5) <= 0.02


def test_mean_of_trees():
    f = forest_of([leaf([1.0], REGRESSION, 0), leaf([3.0], REGRESSION, 0)], REGRESSION, 0)
    assert forest_predict_value(f, [0.0]) == 2.0
    g = forest_of([leaf([4.5], REGRESSION, 0)] * 3, REGRESSION, 0)
    assert forest_predict_value(g, [9.0]) == 4.5


def test_single_tree_forest_matches_tree(clf_data):
    f = train_forest(clf_data, HyperParams(M=1, q_n=1.0, p=1.0))
    X = clf_data.features
    np.testing.assert_array_equal(f.predict_class(X), f.trees[0].predict_class(X, np.random.default_rng(0)))
    assert f.train_counters["multinomial"] == 0


def test_separable_training_accuracy():
    rng = np.random.default_rng(0)
    X = rng.random((200, 2))
    y = (X[:, 0] > 0.5).astype(int)
    f = train_forest(Dataset(X, y, CLASSIFICATION))
    assert np.mean(f.predict_class(X) == y) >= 0.95


def test_task_and_dimension_checks(clf_data):
    f = train_forest(clf_data, HyperParams(M=3))
    with pytest.raises(TypeError):
        f.predict_value(clf_data.features)
    with pytest.raises(ValueError, match="expects 4 features, input has 2"):
        f.predict_class(np.zeros((1, 2)))


def test_outputs_valid_classes():
    ds = make_classification(n=150, n_classes=3, seed=4)
    f = train_forest(ds, HyperParams(M=10))
    pred = f.predict_class(np.random.default_rng(0).random((300, 4)))
    assert pred.min() >= 0 and pred.max() < 3


def test_permutation_invariance():
    ds = make_classification(n=100, seed=5)
    f = train_forest(ds, HyperParams(M=12, seed=2))
    probe = np.random.default_rng(1).random((200, 4))
    base = f.predict_class(probe)
    order = list(range(12))
    random.Random(0).shuffle(order)
    f.trees = [f.trees[i] for i in order]
    f.keys = [f.keys[i] for i in order]
    np.testing.assert_array_equal(f.predict_class(probe), base)

    r = make_regression(seed=6)
    g = train_forest(r, HyperParams(M=9))
    before = g.predict_value(probe[:, :3])
    g.trees, g.keys = g.trees[::-1], g.keys[::-1]
    np.testing.assert_array_equal(g.predict_value(probe[:, :3]), before)


def test_roundtrip_predictions(clf_data, reg_data):
    probe = np.random.default_rng(7).random((100, 4))
    for ds, X in ((clf_data, probe), (reg_data, probe[:, :3])):
        f = train_forest(ds, HyperParams(M=8))
        g = load_model(save_model(f))
        np.testing.assert_array_equal(f.predict(X), g.predict(X))
        assert save_model(g) == save_model(f)


def test_same_seed_same_document(clf_data):
    a = save_model(train_forest(clf_data, HyperParams(M=6, seed=11)))
    b = save_model(train_forest(clf_data, HyperParams(M=6, seed=11)))
    c = save_model(train_forest(clf_data, HyperParams(M=6, seed=12)))
    assert a == b and a != c


def test_workers_do_not_change_model(clf_data):
    a = save_model(train_forest(clf_data, HyperParams(M=6, seed=3), workers=1))
    b = save_model(train_forest(clf_data, HyperParams(M=6, seed=3), workers=2))
    assert a == b


@pytest.mark.parametrize("mangle", [lambda d: "", lambda d: d[: len(d) // 2], lambda d: d.replace('"version":1', '"version":9'),
                                    lambda d: d.replace('"format":"dmrf-forest"', '"format":"other"')])
def test_load_errors(clf_data, mangle):
    doc = save_model(train_forest(clf_data, HyperParams(M=2)))
    with pytest.raises(ModelFormatError):
        load_model(mangle(doc))


def test_stamp_records_time(clf_data):
    f = train_forest(clf_data, HyperParams(M=1), stamp=True)
    assert f.provenance["built_at"] and f.provenance["n_train"] == clf_data.n_samples
    assert train_forest(clf_data, HyperParams(M=1)).provenance["built_at"] is None


def test_empty_dataset_rejected(clf_data):
    # an empty Dataset cannot even be constructed, so training never sees one
    with pytest.raises(DataError):
        clf_data.subset([])
