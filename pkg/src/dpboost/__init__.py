"""Gradient boosted regression trees under pure ε-differential privacy.

Every data-dependent training step is a private mechanism: split
candidates come from Laplace-noised histograms, splits are chosen by an
exponential mechanism over gains, and leaf values are noisy averages.
An exact accountant tracks sequential and parallel composition plus
subsampling amplification.
"""

from .data import (
    DataError,
    Dataset,
    FeatureBounds,
    generate_synthetic,
    load_bounds,
    load_csv,
    load_feature_matrix,
    subsample_indices,
    subsample_rows,
)
from .model import Ensemble, PrivacyInfo, Tree
from .privacy import (
    INFINITE_EPSILON,
    PrivacyAccountant,
    laplace_noise,
    laplace_sample,
    laplace_scale,
    required_base_epsilon,
    select_exponential,
    subsampled_epsilon,
)
from .rng import RngStream
from .sketch import NoisyHistogram, SplitCandidates, build_dp_histogram, propose_splits
from .trainer import (
    LEAF_LAPLACE_MIN_CHILD,
    LEAF_LAPLACE_WORST_CASE,
    LEAF_MODES,
    LEAF_NOISY_AVERAGE,
    PrivacyReport,
    TrainParams,
    build_tree,
    enumerate_candidate_gains,
    gdf_filter,
    noisy_leaf_value,
    select_split_dp,
    simulate_tree_ledger,
    split_gain,
    squared_loss_gradients,
    train,
)

__version__ = "0.1.0"

__all__ = [
    "DataError",
    "Dataset",
    "Ensemble",
    "FeatureBounds",
    "INFINITE_EPSILON",
    "LEAF_LAPLACE_MIN_CHILD",
    "LEAF_LAPLACE_WORST_CASE",
    "LEAF_MODES",
    "LEAF_NOISY_AVERAGE",
    "NoisyHistogram",
    "PrivacyAccountant",
    "PrivacyInfo",
    "PrivacyReport",
    "RngStream",
    "SplitCandidates",
    "Tree",
    "TrainParams",
    "build_dp_histogram",
    "build_tree",
    "enumerate_candidate_gains",
    "gdf_filter",
    "generate_synthetic",
    "laplace_noise",
    "laplace_sample",
    "laplace_scale",
    "load_bounds",
    "load_csv",
    "load_feature_matrix",
    "noisy_leaf_value",
    "propose_splits",
    "required_base_epsilon",
    "select_exponential",
    "select_split_dp",
    "simulate_tree_ledger",
    "split_gain",
    "squared_loss_gradients",
    "subsample_indices",
    "subsample_rows",
    "subsampled_epsilon",
    "train",
]
