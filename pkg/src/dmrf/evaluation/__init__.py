"""Benchmarks, statistics, consistency curves and timing probes."""
from .benchmark import BenchmarkReport, cell_seed, parameter_sweep, run_benchmark, sweep_csv, sweep_grid
from .consistency import (ConsistencyCurve, complexity_probe, consistency_experiment, kn_schedule,
                          synthesize_classification, synthesize_regression)
from .stats import (InsufficientPairsError, WilcoxonResult, accuracy, average_ranks, mean_squared_error,
                    wilcoxon_signed_rank)

__all__ = [
    "BenchmarkReport",
    "ConsistencyCurve",
    "InsufficientPairsError",
    "WilcoxonResult",
    "accuracy",
    "average_ranks",
    "cell_seed",
    "complexity_probe",
    "consistency_experiment",
    "kn_schedule",
    "mean_squared_error",
    "parameter_sweep",
    "run_benchmark",
    "sweep_csv",
    "sweep_grid",
    "synthesize_classification",
    "synthesize_regression",
    "wilcoxon_signed_rank",
]
