"""Certified lower and upper bounds on label-flip robustness for linear classifiers."""

__version__ = "0.1.0"

from .bounds import BoundsParams, IntervalResult, robustness_interval
from .dataset import Dataset, SplitSpec, TestTarget, load_csv
from .exact import brute_force_robustness, encode, solve_bnb
from .linsep import LinearClassifier, check_consistency, feasible_labeling, solve_lp
from .lower import lower_bound, partition
from .trainer import LossKind, TrainConfig, train
from .upper import certify_upper, upper_bound

__all__ = [
    "BoundsParams",
    "Dataset",
    "IntervalResult",
    "LinearClassifier",
    "LossKind",
    "SplitSpec",
    "TestTarget",
    "TrainConfig",
    "brute_force_robustness",
    "certify_upper",
    "check_consistency",
    "encode",
    "feasible_labeling",
    "load_csv",
    "lower_bound",
    "partition",
    "robustness_interval",
    "solve_bnb",
    "solve_lp",
    "train",
    "upper_bound",
]
