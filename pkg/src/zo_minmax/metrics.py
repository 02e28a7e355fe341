"""Suboptimality (gap) and accuracy metrics."""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .errors import InvalidArgumentError
from .geometry import FeasibleSet
from .oracle import FiniteSumOracle
from .wdrsc import QuadraticCost, StrategicDataset

__all__ = ["GapReport", "AccuracyReport", "gap", "gap_function", "accuracy", "robustness_curve"]

GAP_FLOOR = -1e-8


@dataclass(frozen=True)
class GapReport:
    value: float
    reference: np.ndarray
    tol: float


def gap(
    oracle: FiniteSumOracle,
    reference: np.ndarray,
    u: np.ndarray,
    feasible: FeasibleSet | None = None,
    tol: float = 1e-6,
) -> GapReport:
    """L(x, y*) - L(x*, y) with full-batch losses.

    ``x`` collects the minimising blocks and ``y`` the maximising ones.
    """
    u = np.asarray(u, dtype=np.float64)
    reference = np.asarray(reference, dtype=np.float64)
    if feasible is not None:
        for name, point in (("point", u), ("reference", reference)):
            if not feasible.contains(point, tol):
                raise InvalidArgumentError(f"{name} is infeasible beyond tol={tol}")
    mask = oracle.max_mask
    mixed_min = np.where(mask, reference, u)
    mixed_max = np.where(mask, u, reference)
    value = oracle.loss(mixed_min) - oracle.loss(mixed_max)
    if value < GAP_FLOOR:
        warnings.warn(f"negative gap {value:.3e}: reference is not a saddle point", stacklevel=2)
    return GapReport(value=float(value), reference=reference, tol=tol)


def gap_function(oracle: FiniteSumOracle, reference: np.ndarray):
    """Closure returning the bare gap value, for solver traces."""
    reference = np.asarray(reference, dtype=np.float64)
    mask = oracle.max_mask

    def evaluate(u):
        return oracle.loss(np.where(mask, reference, u)) - oracle.loss(np.where(mask, u, reference))

    return evaluate


@dataclass(frozen=True)
class AccuracyReport:
    margin_accuracy: float
    sign_accuracy: float
    zeta: float


def accuracy(dataset: StrategicDataset, theta, zeta: float, mask=None) -> AccuracyReport:
    """Mean label-signed margin and sign agreement on responded features.

    With ``zeta == 0`` nobody moves.
    """
    theta = np.asarray(theta, dtype=np.float64)
    if theta.size != dataset.d:
        raise InvalidArgumentError(f"theta has {theta.size} entries, dataset has d={dataset.d}")
    if zeta > 0:
        margins = QuadraticCost(dataset, zeta, mask).inner_all(theta)
    elif zeta == 0:
        margins = dataset.features @ theta
    else:
        raise InvalidArgumentError("zeta must be >= 0")
    predicted = np.where(margins >= 0.0, 1.0, -1.0)
    return AccuracyReport(
        margin_accuracy=float(np.mean(dataset.labels * margins)),
        sign_accuracy=float(np.mean(predicted == dataset.labels)),
        zeta=float(zeta),
    )


def robustness_curve(
    dataset: StrategicDataset,
    classifiers: Mapping[str, np.ndarray],
    zeta_grid: Sequence[float],
    mask=None,
) -> list[tuple[str, float, float, float]]:
    """Rows (classifier, zeta, margin_accuracy, sign_accuracy), classifier-major."""
    if len(zeta_grid) == 0:
        raise InvalidArgumentError("zeta grid must be non-empty")
    rows = []
    for name, theta in classifiers.items():
        for zeta in zeta_grid:
            rep = accuracy(dataset, theta, zeta, mask)
            rows.append((name, float(zeta), rep.margin_accuracy, rep.sign_accuracy))
    return rows
