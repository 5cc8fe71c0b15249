"""Data-driven multinomial random forest and baseline forest variants."""
from .data import CLASSIFICATION, REGRESSION, Dataset, EvalProtocol, load_csv, make_partitions
from .forest import (ForestModel, bernoulli_bootstrap, forest_predict_class, forest_predict_value,
                     load_model, save_model, train_forest)
from .params import VARIANTS, HyperParams

__version__ = "0.1.0"

__all__ = [
    "CLASSIFICATION",
    "REGRESSION",
    "Dataset",
    "EvalProtocol",
    "ForestModel",
    "HyperParams",
    "VARIANTS",
    "bernoulli_bootstrap",
    "forest_predict_class",
    "forest_predict_value",
    "load_csv",
    "load_model",
    "make_partitions",
    "save_model",
    "train_forest",
]
