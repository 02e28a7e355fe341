"""Gradient-free saddle-point solvers with random reshuffling, and a
distributionally robust strategic classification application."""

from .errors import (
    DataLoadError,
    InvalidArgumentError,
    NonConvergenceError,
    NumericalFailureError,
    UnsupportedModeError,
    ZoMinmaxError,
)
from .geometry import Ball, Box, CappedSoc, FeasibleSet, Product, contains, diameter, project
from .oracle import (
    Block,
    EstimatorMode,
    FiniteSumOracle,
    GradientEstimator,
    QueryCounter,
    SeededRng,
    hybrid_gradient,
    sample_sphere,
    smoothed_loss,
    zo_gradient,
)
from .solvers import Schedule, SolverConfig, Trace, Variant, reference_saddle, run

__version__ = "0.1.0"
