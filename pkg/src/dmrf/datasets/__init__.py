"""Named benchmark datasets.

Bundled files ship inside the package. The remaining benchmark sets cannot
be redistributed here; drop a CSV with a header row (label in the last
column) named as in :data:`REGISTRY` into a directory and point
``DMRF_DATA_DIR`` or ``data_dir`` at it.
"""
from __future__ import annotations

import os
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

from ..data import CLASSIFICATION, REGRESSION, Dataset, load_csv

DATA_DIR_ENV = "DMRF_DATA_DIR"


class DatasetUnavailable(FileNotFoundError):
    """A registered dataset whose file is neither bundled nor supplied."""


@dataclass(frozen=True)
class DatasetInfo:
    name: str
    filename: str
    task: str
    label_column: int | str = -1
    bundled: bool = False


REGISTRY = {
    info.name: info
    for info in (
        DatasetInfo("tic-tac-toe", "tic-tac-toe.csv", CLASSIFICATION, bundled=True),
        DatasetInfo("winequality-red", "winequality-red.csv", CLASSIFICATION, bundled=True),
        DatasetInfo("concrete", "concrete.csv", REGRESSION, bundled=True),
        DatasetInfo("blogger", "blogger.csv", CLASSIFICATION),
        DatasetInfo("vertebral", "vertebral.csv", CLASSIFICATION),
        DatasetInfo("banknote", "banknote.csv", CLASSIFICATION),
        DatasetInfo("transfusion", "transfusion.csv", CLASSIFICATION),
    )
}


def locate(name: str, data_dir=None) -> Path:
    """Path of a registered dataset; a supplied directory wins over the bundle."""
    try:
        info = REGISTRY[name]
    except KeyError:
        raise KeyError(f"unknown dataset {name!r}; known: {', '.join(sorted(REGISTRY))}") from None
    searched = []
    for d in (data_dir, os.environ.get(DATA_DIR_ENV)):
        if d:
            p = Path(d) / info.filename
            searched.append(str(p))
            if p.is_file():
                return p
    if info.bundled:
        return Path(str(resources.files(__name__) / info.filename))
    where = ", ".join(searched) if searched else f"no directory given (set {DATA_DIR_ENV})"
    raise DatasetUnavailable(f"dataset {name!r} is not bundled; looked for {info.filename} in: {where}")


def is_available(name: str, data_dir=None) -> bool:
    try:
        locate(name, data_dir)
    except DatasetUnavailable:
        return False
    return True


def load(name: str, data_dir=None) -> Dataset:
    info = REGISTRY[name]
    return load_csv(locate(name, data_dir), info.label_column, info.task)
