"""Dirichlet-process mixtures of Bayesian local linear regressions.

``ilr`` holds the flat model and ``hilr`` the two-level model with shared
slopes. Both train by truncated variational Bayes and predict with Student-t
mixtures.
"""

from . import data, distributions, features, hilr, ilr, metrics
from .data import Dataset
from .errors import (
    ConfigError,
    DimensionError,
    DPLRError,
    ELBODecreaseError,
    NumericalDegeneracyError,
    NumericalError,
    ParseError,
)
from .hilr import HILRConfig, HILRModel
from .ilr import ILRConfig, ILRModel
from .metrics import evaluate, mse, nmse
from .serialization import load_model, save_model

__all__ = [
    "ConfigError",
    "DPLRError",
    "Dataset",
    "DimensionError",
    "ELBODecreaseError",
    "HILRConfig",
    "HILRModel",
    "ILRConfig",
    "ILRModel",
    "NumericalDegeneracyError",
    "NumericalError",
    "ParseError",
    "data",
    "distributions",
    "evaluate",
    "features",
    "hilr",
    "ilr",
    "load_model",
    "metrics",
    "mse",
    "nmse",
    "save_model",
]
