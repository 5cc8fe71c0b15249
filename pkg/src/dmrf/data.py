"""Tabular ingestion, numeric encoding and train/test partitions."""
from __future__ import annotations

import csv
import hashlib
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

CLASSIFICATION = "classification"
REGRESSION = "regression"

MISSING = -1.0
MISSING_TOKENS = frozenset({"", "?", "na", "n/a", "nan", "null", "none"})


class DataError(ValueError):
    """Raised when a file cannot be turned into a valid dataset."""


def normalize_task(task: str) -> str:
    t = str(task).lower()
    if t in ("class", "classification", "clf"):
        return CLASSIFICATION
    if t in ("reg", "regression"):
        return REGRESSION
    raise ValueError(f"unknown task kind {task!r}")


@dataclass
class Schema:
    """Encoding maps learned at ingestion and reused at prediction time.

    ``categories`` maps a feature name to its sorted category strings (the
    code of a category is its position). ``classes`` holds the original label
    strings in first-appearance order.
    """

    feature_names: list[str]
    label_name: str
    task: str
    categories: dict[str, list[str]] = field(default_factory=dict)
    classes: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "feature_names": list(self.feature_names),
            "label_name": self.label_name,
            "task": self.task,
            "categories": {k: list(v) for k, v in sorted(self.categories.items())},
            "classes": list(self.classes),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Schema":
        return cls(
            feature_names=list(d["feature_names"]),
            label_name=d["label_name"],
            task=d["task"],
            categories={k: list(v) for k, v in d.get("categories", {}).items()},
            classes=list(d.get("classes", [])),
        )

    def decode_class(self, code: int) -> str:
        return self.classes[int(code)]


@dataclass
class Dataset:
    """Numeric feature matrix plus labels.

    ``features`` is stored column-major since split search reads one column
    at a time.
    """

    features: np.ndarray
    labels: np.ndarray
    task: str
    n_classes: int = 0
    feature_names: list[str] | None = None
    schema: Schema | None = None

    def __post_init__(self):
        self.task = normalize_task(self.task)
        X = np.asarray(self.features, dtype=np.float64)
        if X.ndim != 2:
            raise DataError("features must be a 2-D matrix")
        n, d = X.shape
        if n < 1 or d < 1:
            raise DataError(f"dataset must have n >= 1 and D >= 1, got {n}x{d}")
        if np.isnan(X).any():
            raise DataError("features contain NaN; missing values must be replaced")
        self.features = np.asfortranarray(X)
        if self.task == CLASSIFICATION:
            y = np.asarray(self.labels)
            if y.size and not np.all(y == np.round(y)):
                raise DataError("classification labels must be integers")
            y = y.astype(np.int64)
            if self.n_classes <= 0:
                self.n_classes = int(y.max()) + 1 if y.size else 0
            if y.size and (y.min() < 0 or y.max() >= self.n_classes):
                raise DataError("class index out of range")
        else:
            y = np.asarray(self.labels, dtype=np.float64)
            if np.isnan(y).any():
                raise DataError("regression targets contain NaN")
            self.n_classes = 0
        if y.shape != (n,):
            raise DataError(f"expected {n} labels, got shape {y.shape}")
        self.labels = y
        if self.feature_names is None:
            self.feature_names = [f"x{j}" for j in range(d)]
        if len(self.feature_names) != d:
            raise DataError("feature_names length differs from D")

    @property
    def n_samples(self) -> int:
        return self.features.shape[0]

    @property
    def n_features(self) -> int:
        return self.features.shape[1]

    @property
    def is_classification(self) -> bool:
        return self.task == CLASSIFICATION

    def subset(self, indices) -> "Dataset":
        idx = np.asarray(indices, dtype=np.int64)
        return Dataset(
            self.features[idx],
            self.labels[idx],
            self.task,
            n_classes=self.n_classes,
            feature_names=list(self.feature_names),
            schema=self.schema,
        )

    def fingerprint(self) -> str:
        h = hashlib.sha256()
        h.update(self.task.encode())
        h.update(np.ascontiguousarray(self.features).tobytes())
        h.update(np.ascontiguousarray(self.labels).tobytes())
        return h.hexdigest()


def _is_missing(cell: str) -> bool:
    return cell.strip().lower() in MISSING_TOKENS


def _parse_float(cell: str):
    try:
        v = float(cell)
    except ValueError:
        return None
    return v if math.isfinite(v) else None


def _resolve_label(header: list[str], label_column) -> int:
    if isinstance(label_column, int) or (isinstance(label_column, str) and label_column.lstrip("-").isdigit()
                                         and label_column not in header):
        j = int(label_column)
        if j < 0:
            j += len(header)
        if not 0 <= j < len(header):
            raise DataError(f"label column index {label_column} out of range for {len(header)} columns")
        return j
    if label_column not in header:
        raise DataError(f"label column {label_column!r} not found in header {header}")
    return header.index(label_column)


def encode_rows(header: list[str], rows: list[list[str]], label_idx: int, task: str,
                schema: Schema | None = None) -> Dataset:
    """Turn string cells into a :class:`Dataset`.

    With ``schema`` given, category and class maps are reused instead of
    learned; unseen categories and blanks become the missing sentinel.
    """
    task = normalize_task(task)
    feat_cols = [j for j in range(len(header)) if j != label_idx]
    names = [header[j] for j in feat_cols]
    n = len(rows)
    X = np.empty((n, len(feat_cols)), dtype=np.float64)
    categories: dict[str, list[str]] = {}
    for out_j, j in enumerate(feat_cols):
        col = [r[j].strip() for r in rows]
        name = header[j]
        if schema is not None:
            cats = schema.categories.get(name)
        else:
            numeric = all(_is_missing(c) or _parse_float(c) is not None for c in col)
            cats = None if numeric else sorted({c for c in col if not _is_missing(c)})
            if cats is not None:
                categories[name] = cats
        if cats is None:
            for i, c in enumerate(col):
                v = None if _is_missing(c) else _parse_float(c)
                X[i, out_j] = MISSING if v is None else v
        else:
            code = {c: float(k) for k, c in enumerate(cats)}
            for i, c in enumerate(col):
                X[i, out_j] = code.get(c, MISSING)

    raw_labels = [r[label_idx].strip() for r in rows]
    if task == CLASSIFICATION:
        if schema is not None:
            classes = list(schema.classes)
            lookup = {c: k for k, c in enumerate(classes)}
            y = np.array([lookup.get(c, -1) for c in raw_labels], dtype=np.int64)
            if (y < 0).any():
                bad = raw_labels[int(np.argmax(y < 0))]
                raise DataError(f"label {bad!r} not seen at training time")
        else:
            classes = []
            lookup = {}
            for c in raw_labels:
                if c not in lookup:
                    lookup[c] = len(classes)
                    classes.append(c)
            if len(classes) < 2:
                raise DataError("classification label column has a single class; task is degenerate")
            y = np.array([lookup[c] for c in raw_labels], dtype=np.int64)
        n_classes = len(classes)
    else:
        classes = []
        vals = [_parse_float(c) for c in raw_labels]
        if any(v is None for v in vals):
            raise DataError("regression label column has missing or non-numeric values")
        y = np.array(vals, dtype=np.float64)
        n_classes = 0

    if schema is None:
        schema = Schema(names, header[label_idx], task, categories, classes)
    return Dataset(X, y, task, n_classes=n_classes, feature_names=names, schema=schema)


def read_table(path) -> tuple[list[str], list[list[str]]]:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"no such file: {path}")
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path} is empty") from None
        header = [h.strip() for h in header]
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise DataError(f"{path}:{lineno}: expected {len(header)} cells, got {len(row)}")
            rows.append(row)
    return header, rows


def load_csv(path, label_column=-1, task: str = CLASSIFICATION, schema: Schema | None = None) -> Dataset:
    """Load a comma-separated file with one header row.

    Missing or unparseable numeric cells become ``-1.0``. Non-numeric
    columns are ordinally encoded by lexicographic order of their distinct
    values; classification labels are mapped to ``0..c-1`` in order of first
    appearance.
    """
    header, rows = read_table(path)
    if not rows:
        raise DataError(f"{path} has a header but no data rows")
    if schema is not None:
        label_idx = header.index(schema.label_name) if schema.label_name in header else None
        if label_idx is None:
            # prediction input without a label column
            header = header + [schema.label_name]
            rows = [r + [schema.classes[0] if schema.classes else "0"] for r in rows]
            label_idx = len(header) - 1
    else:
        label_idx = _resolve_label(header, label_column)
    return encode_rows(header, rows, label_idx, task if schema is None else schema.task, schema)


@dataclass
class EvalProtocol:
    repeats: int = 10
    test_fraction: float = 0.2
    stratified: bool = True
    master_seed: int = 0

    def __post_init__(self):
        if self.repeats < 1:
            raise ValueError("repeats must be >= 1")
        if not 0.0 < self.test_fraction < 1.0:
            raise ValueError("test_fraction must lie in (0, 1)")


@dataclass
class Partitions:
    splits: list[tuple[np.ndarray, np.ndarray]]
    stratified: bool
    fallback: bool = False

    def __iter__(self):
        return iter(self.splits)

    def __len__(self):
        return len(self.splits)

    def __getitem__(self, i):
        return self.splits[i]


def _test_size(n: int, fraction: float) -> int:
    return max(1, min(n - 1, int(round(fraction * n))))


def make_partitions(ds: Dataset, proto: EvalProtocol) -> Partitions:
    """Repeated random train/test splits, deterministic in ``proto.master_seed``.

    Stratified splits allocate the test budget across classes by largest
    remainder, so each class gets its proportional share within one sample.
    """
    n = ds.n_samples
    n_test = _test_size(n, proto.test_fraction)
    if n < 2:
        raise DataError("need at least two rows to partition")
    stratify = proto.stratified and ds.is_classification
    fallback = False
    if stratify:
        counts = np.bincount(ds.labels, minlength=ds.n_classes)
        if (counts[counts > 0] < proto.repeats).any():
            warnings.warn("a class has fewer samples than repeats; using unstratified splits")
            stratify = False
            fallback = True
    root = np.random.SeedSequence(proto.master_seed)
    out = []
    for r, child in enumerate(root.spawn(proto.repeats)):
        rng = np.random.default_rng(child)
        if stratify:
            test = _stratified_test(ds.labels, ds.n_classes, n_test, rng)
        else:
            test = np.sort(rng.permutation(n)[:n_test])
        mask = np.zeros(n, dtype=bool)
        mask[test] = True
        out.append((np.flatnonzero(~mask), np.flatnonzero(mask)))
    return Partitions(out, stratified=stratify, fallback=fallback)


def _stratified_test(labels: np.ndarray, n_classes: int, n_test: int, rng) -> np.ndarray:
    n = labels.shape[0]
    counts = np.bincount(labels, minlength=n_classes)
    quota = counts * n_test / n
    take = np.floor(quota).astype(np.int64)
    short = n_test - int(take.sum())
    if short > 0:
        rem = quota - take
        # largest remainder, ties to the lower class index
        order = np.lexsort((np.arange(n_classes), -rem))
        take[order[:short]] += 1
    parts = []
    for k in range(n_classes):
        members = np.flatnonzero(labels == k)
        if take[k]:
            parts.append(rng.permutation(members)[: take[k]])
    return np.sort(np.concatenate(parts)) if parts else np.empty(0, dtype=np.int64)


def train_test(ds: Dataset, train_idx: Sequence[int], test_idx: Sequence[int]) -> tuple[Dataset, Dataset]:
    return ds.subset(train_idx), ds.subset(test_idx)
