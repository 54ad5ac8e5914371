"""Differentially private interior point solvers and threshold learning."""
from .domain import Database, NodeId, OrderedDomain, Path, PrivacyBudget, interior_score, log_star, weight
from .errors import InsufficientData, InteriorPointError
from .heavy_paths import heavy_paths, heavy_paths_min_size
from .learner import LabeledDatabase, ThresholdHypothesis, learn_threshold
from .mechanisms import RandomSource
from .treelog import treelog, treelog_min_size

__all__ = [
    "Database",
    "InsufficientData",
    "InteriorPointError",
    "LabeledDatabase",
    "NodeId",
    "OrderedDomain",
    "Path",
    "PrivacyBudget",
    "RandomSource",
    "ThresholdHypothesis",
    "heavy_paths",
    "heavy_paths_min_size",
    "interior_score",
    "learn_threshold",
    "log_star",
    "treelog",
    "treelog_min_size",
    "weight",
]
