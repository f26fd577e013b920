"""Hyperspectral and multispectral image fusion with subspace-coefficient tensor regularization."""

from .degradation import DegradationModel, gaussian_kernel, simulate_observations
from .errors import DimensionError, FormatError, NonFiniteError, ParameterError, SolverError
from .io import read_hst, write_hst
from .metrics import evaluate
from .solver import FusionResult, SolverConfig, solve

__version__ = "0.1.0"

__all__ = [
    "DegradationModel", "gaussian_kernel", "simulate_observations",
    "DimensionError", "FormatError", "NonFiniteError", "ParameterError", "SolverError",
    "read_hst", "write_hst", "evaluate", "FusionResult", "SolverConfig", "solve",
]
