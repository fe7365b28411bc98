"""Simulation and truncated spectral estimation of Banach-valued AR(1) processes."""

from .exceptions import (
    ArbError,
    ConfigError,
    ContractError,
    EigenvalueTieError,
    StationarityError,
    TruncationError,
    UnsupportedOperation,
)
from .gelfand import SpectralModel, Weights, norm, riesz_map, rkhs_norm
from .process import ARBModel, Trajectory, build_model, reference_model, simulate
from .estimator import TruncationRule, estimate_rho, predict, spectral_decomposition

__all__ = [
    "ARBModel", "ArbError", "ConfigError", "ContractError", "EigenvalueTieError",
    "SpectralModel", "StationarityError", "Trajectory", "TruncationError", "TruncationRule",
    "UnsupportedOperation", "Weights", "build_model", "estimate_rho", "norm", "predict",
    "reference_model", "riesz_map", "rkhs_norm", "simulate", "spectral_decomposition",
]

__version__ = "0.1.0"
