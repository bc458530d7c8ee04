"""Evaluation toolkit for objective multimedia quality models.

Compares model predictions against subjective MOS data using the
Constrained Concordance Index alongside PCC, SRCC and Kendall's tau, and
provides bootstrap robustness experiments (sample size, rater panels,
restricted range) with deterministic seeding.
"""

__version__ = "0.1.0"

from .cci import ConstrainedPairSet, build_constrained_set, cci, cci_from_arrays, slope_decomposition
from .correlations import MetricValue, ktau, pcc, srcc
from .data import (
    JoinedEvaluation,
    PredictionTable,
    RatingsDataset,
    Scale,
    join,
    load_joined,
    load_predictions,
    load_ratings,
    save_joined,
    save_ratings,
)
from .errors import (
    CcievalError,
    DataValidationError,
    DegenerateStatisticError,
    EmptyConstrainedSetError,
    GranularityMismatchError,
)
from .experiments import (
    ExperimentConfig,
    ExperimentReport,
    rater_size_grid,
    run_rater_sampling_experiment,
    run_restricted_range_experiment,
    run_sample_size_experiment,
    run_synthetic_experiment,
    sample_size_grid,
    simulate_correlated_pairs,
    simulate_rater_dataset,
    simulate_restricted_range_regions,
    simulate_uncertain_pairs,
)
from .mos import CiPolicy, MosTable, mos_per_condition, mos_per_file, t_quantile
from .significance import (
    SignificanceMatrix,
    holm_correction,
    neighborhood_analysis,
    wilcoxon_signed_rank,
)

__all__ = [
    "__version__",
    "ConstrainedPairSet",
    "build_constrained_set",
    "cci",
    "cci_from_arrays",
    "slope_decomposition",
    "MetricValue",
    "ktau",
    "pcc",
    "srcc",
    "JoinedEvaluation",
    "PredictionTable",
    "RatingsDataset",
    "Scale",
    "join",
    "load_joined",
    "load_predictions",
    "load_ratings",
    "save_joined",
    "save_ratings",
    "CcievalError",
    "DataValidationError",
    "DegenerateStatisticError",
    "EmptyConstrainedSetError",
    "GranularityMismatchError",
    "ExperimentConfig",
    "ExperimentReport",
    "rater_size_grid",
    "run_rater_sampling_experiment",
    "run_restricted_range_experiment",
    "run_sample_size_experiment",
    "run_synthetic_experiment",
    "sample_size_grid",
    "simulate_correlated_pairs",
    "simulate_rater_dataset",
    "simulate_restricted_range_regions",
    "simulate_uncertain_pairs",
    "CiPolicy",
    "MosTable",
    "mos_per_condition",
    "mos_per_file",
    "t_quantile",
    "SignificanceMatrix",
    "holm_correction",
    "neighborhood_analysis",
    "wilcoxon_signed_rank",
]
