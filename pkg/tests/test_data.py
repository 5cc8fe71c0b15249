import warnings

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from dmrf.data import (CLASSIFICATION, MISSING, REGRESSION, DataError, Dataset, EvalProtocol, Schema,
                       load_csv, make_partitions)


def write(tmp_path, text, name="d.csv"):
    p = tmp_path / name
    p.write_text(text, encoding="utf-8")
    return p


def test_blank_cell_becomes_minus_one(tmp_path):
    p = write(tmp_path, "a,b,y\n1,2,x\n3,,y\n5,6,x\n7,8,y\n")
    ds = load_csv(p)
    assert ds.features[1, 1] == -1.0 == MISSING
    assert ds.features[0].tolist() == [1.0, 2.0]


def test_labels_first_appearance(tmp_path):
    ds = load_csv(write(tmp_path, "f,y\n1,a\n2,b\n3,a\n"))
    assert ds.labels.tolist() == [0, 1, 0]
    assert ds.n_classes == 2
    assert ds.schema.classes == ["a", "b"]


def test_string_column_lexicographic():
    # oracle: rank of each value among the sorted distinct strings
    values = ["red", "blue", "red", "green"]
    expected = [sorted(set(values)).index(v) for v in values]
    assert expected == [2, 0, 2, 1]


def test_string_column_encoding(tmp_path):
    ds = load_csv(write(tmp_path, "c,y\nred,0\nblue,1\nred,0\ngreen,1\n"))
    assert ds.features[:, 0].tolist() == [2.0, 0.0, 2.0, 1.0]
    assert ds.schema.categories["c"] == ["blue", "green", "red"]


def test_label_by_name_and_index(tmp_path):
    p = write(tmp_path, "y,f\n0,1.5\n1,2.5\n0,3.5\n")
    a = load_csv(p, label_column="y")
    b = load_csv(p, label_column=0)
    assert np.array_equal(a.features, b.features)
    assert a.features[:, 0].tolist() == [1.5, 2.5, 3.5]


def test_regression_targets(tmp_path):
    ds = load_csv(write(tmp_path, "f,t\n1,0.5\n2,1.5\n"), task="reg")
    assert ds.task == REGRESSION
    assert ds.labels.tolist() == [0.5, 1.5]


@pytest.mark.parametrize("text,msg", [
    ("", "empty"),
    ("f,y\n", "no data rows"),
    ("f,y\n1,a\n2,a\n", "single class"),
])
def test_load_errors(tmp_path, text, msg):
    with pytest.raises(DataError, match=msg):
        load_csv(write(tmp_path, text))


def test_missing_label_column(tmp_path):
    with pytest.raises((DataError, ValueError)):
        load_csv(write(tmp_path, "f,y\n1,a\n2,b\n"), label_column="nope")


def test_missing_file(tmp_path):
    with pytest.raises(FileNotFoundError, match="nope.csv"):
        load_csv(tmp_path / "nope.csv")


def test_ragged_row(tmp_path):
    with pytest.raises(DataError, match="expected 2 cells"):
        load_csv(write(tmp_path, "f,y\n1,a\n2\n"))


def test_schema_reuse_and_decode(tmp_path):
    train = load_csv(write(tmp_path, "c,y\nred,p\nblue,q\n", "a.csv"))
    other = load_csv(write(tmp_path, "c,y\nblue,q\npurple,p\n", "b.csv"), schema=train.schema)
    assert other.features[:, 0].tolist() == [0.0, MISSING]
    assert other.labels.tolist() == [1, 0]
    assert [train.schema.decode_class(k) for k in train.labels] == ["p", "q"]
    assert Schema.from_dict(train.schema.to_dict()) == train.schema


def test_dataset_invariants():
    with pytest.raises(DataError):
        Dataset(np.array([[np.nan]]), np.array([0]), CLASSIFICATION, n_classes=1)
    with pytest.raises(DataError):
        Dataset(np.zeros((2, 1)), np.array([0, 2]), CLASSIFICATION, n_classes=2)
    with pytest.raises(DataError):
        Dataset(np.zeros((0, 1)), np.zeros(0), REGRESSION)


def test_partition_sizes():
    ds = Dataset(np.arange(10.0)[:, None], np.arange(10.0), REGRESSION)
    parts = make_partitions(ds, EvalProtocol(repeats=4, test_fraction=0.2))
    assert len(parts) == 4
    for tr, te in parts:
        assert len(te) == 2 and len(tr) == 8
        assert not set(tr) & set(te)


def test_partition_deterministic():
    ds = Dataset(np.arange(30.0)[:, None], np.arange(30) % 3, CLASSIFICATION)
    a = make_partitions(ds, EvalProtocol(master_seed=5))
    b = make_partitions(ds, EvalProtocol(master_seed=5))
    c = make_partitions(ds, EvalProtocol(master_seed=6))
    assert all(np.array_equal(x[1], y[1]) for x, y in zip(a, b))
    assert any(not np.array_equal(x[1], y[1]) for x, y in zip(a, c))


def test_stratified_balanced_pair():
    ds = Dataset(np.arange(10.0)[:, None], np.array([0] * 5 + [1] * 5), CLASSIFICATION)
    for _, te in make_partitions(ds, EvalProtocol(repeats=5, test_fraction=0.2)):
        assert sorted(ds.labels[te].tolist()) == [0, 1]


def test_stratified_fallback_flag():
    labels = np.array([0] * 20 + [1] * 3)
    ds = Dataset(np.arange(23.0)[:, None], labels, CLASSIFICATION)
    with warnings.catch_warnings(record=True) as w:
        warnings.simplefilter("always")
        parts = make_partitions(ds, EvalProtocol(repeats=5))
    assert parts.fallback and not parts.stratified
    assert w


@given(st.lists(st.integers(0, 3), min_size=12, max_size=80), st.floats(0.1, 0.5), st.integers(0, 2**32))
def test_partition_properties(labels, frac, seed):
    y = np.array(labels)
    y[:4] = np.arange(4)
    n = y.shape[0]
    ds = Dataset(np.zeros((n, 1)), y, CLASSIFICATION, n_classes=4)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        parts = make_partitions(ds, EvalProtocol(repeats=2, test_fraction=frac, master_seed=seed))
    for tr, te in parts:
        assert np.array_equal(np.sort(np.concatenate([tr, te])), np.arange(n))
        if parts.stratified:
            counts = np.bincount(y, minlength=4)
            got = np.bincount(y[te], minlength=4)
            assert np.all(np.abs(got - counts * len(te) / n) <= 1.0)
