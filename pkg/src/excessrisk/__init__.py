"""Excess-risk laboratory: local entropies and net ERM, sample compression
schemes, a hard-margin SVM scheme, and a Monte Carlo bound-checking harness."""

from . import compression, config, domain, entropy, errors, harness, skeleton, svm
from .errors import (
    CapacityError,
    ConditioningError,
    ConfigurationError,
    ExcessRiskError,
    InconsistencyError,
    InfeasibleError,
    PrecisionError,
    SchemeSizeError,
)

__version__ = "0.1.0"

__all__ = [
    "compression", "config", "domain", "entropy", "errors", "harness", "skeleton", "svm",
    "CapacityError", "ConditioningError", "ConfigurationError", "ExcessRiskError",
    "InconsistencyError", "InfeasibleError", "PrecisionError", "SchemeSizeError",
]
