"""Kurtosis vs. squared-skewness plane (Pearson / Cullen-Frey diagram)."""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .moments import MomentSummary, DegenerateSample, MIN_COUNT

INFEASIBLE_SLACK = 1e-9
DEFAULT_TOL = 0.1


@dataclass(frozen=True)
class PearsonPoint:
    beta1: float  # squared skewness
    beta2: float  # kurtosis, non-excess

    @property
    def feasible(self) -> bool:
        return self.beta2 >= self.beta1 + 1.0 - INFEASIBLE_SLACK


NORMAL = PearsonPoint(0.0, 3.0)
UNIFORM = PearsonPoint(0.0, 1.8)
EXPONENTIAL = PearsonPoint(4.0, 9.0)
LOGISTIC = PearsonPoint(0.0, 4.2)


@dataclass(frozen=True)
class Landmark:
    name: str
    point: PearsonPoint


@dataclass(frozen=True)
class BoundaryLine:
    """``beta2 = intercept + slope * beta1``."""

    name: str
    intercept: float
    slope: float

    def at(self, beta1):
        return self.intercept + self.slope * np.asarray(beta1)


# lower edge: two-point distributions; upper edge: gamma family
BETA_LOWER = BoundaryLine("feasibility_limit", 1.0, 1.0)
BETA_UPPER = BoundaryLine("gamma_line", 3.0, 1.5)


def landmarks() -> list[Landmark]:
    return [
        Landmark("normal", NORMAL),
        Landmark("uniform", UNIFORM),
        Landmark("exponential", EXPONENTIAL),
        Landmark("logistic", LOGISTIC),
    ]


def boundaries() -> list[BoundaryLine]:
    return [BETA_LOWER, BETA_UPPER]


class Region(str, Enum):
    INFEASIBLE = "infeasible"
    NEAR_NORMAL = "near_normal"
    NEAR_UNIFORM = "near_uniform"
    BETA_REGION = "beta_region"
    OTHER = "other"


@dataclass(frozen=True)
class RegionLabel:
    label: Region
    tol: float


def to_pearson(summary: MomentSummary) -> PearsonPoint:
    if summary.n < MIN_COUNT or not summary.std > 0:
        raise DegenerateSample("summary has no defined skewness/kurtosis")
    return PearsonPoint(summary.skewness**2, summary.kurtosis)


def _distance(p: PearsonPoint, q: PearsonPoint, scale: tuple[float, float]) -> float:
    sx, sy = scale
    return math.hypot(sx * (p.beta1 - q.beta1), sy * (p.beta2 - q.beta2))


def metric1(p: PearsonPoint, scale: tuple[float, float] = (1.0, 1.0)) -> float:
    """Distance from the normal-distribution landmark (0, 3).

    ``scale`` weights the (beta1, beta2) axes; identity by default.
    """
    return _distance(p, NORMAL, scale)


def metric2(p: PearsonPoint, scale: tuple[float, float] = (1.0, 1.0)) -> float:
    """Distance from the uniform-distribution landmark (0, 1.8)."""
    return _distance(p, UNIFORM, scale)


def metric1_array(beta1, beta2, scale=(1.0, 1.0)) -> np.ndarray:
    return np.hypot(scale[0] * (np.asarray(beta1) - NORMAL.beta1),
                    scale[1] * (np.asarray(beta2) - NORMAL.beta2))


def metric2_array(beta1, beta2, scale=(1.0, 1.0)) -> np.ndarray:
    return np.hypot(scale[0] * (np.asarray(beta1) - UNIFORM.beta1),
                    scale[1] * (np.asarray(beta2) - UNIFORM.beta2))


def classify_region(p: PearsonPoint, tol: float = DEFAULT_TOL) -> RegionLabel:
    """Label a point on the plane.

    Precedence: infeasible, near_normal, near_uniform, beta_region, other.
    The beta region is the band between ``beta2 = beta1 + 1`` and the gamma
    line ``beta2 = 3 + 1.5 * beta1``, both edges included.
    """
    if tol < 0:
        raise ValueError("tolerance must be non-negative")
    if p.beta2 < p.beta1 + 1.0 - INFEASIBLE_SLACK:
        label = Region.INFEASIBLE
    elif metric1(p) <= tol:
        label = Region.NEAR_NORMAL
    elif metric2(p) <= tol:
        label = Region.NEAR_UNIFORM
    elif p.beta1 + 1.0 - INFEASIBLE_SLACK <= p.beta2 <= BETA_UPPER.at(p.beta1) + INFEASIBLE_SLACK:
        label = Region.BETA_REGION
    else:
        label = Region.OTHER
    return RegionLabel(label, tol)


def classify_array(beta1, beta2, tol: float = DEFAULT_TOL) -> np.ndarray:
    """Vectorized :func:`classify_region`; returns an array of label strings."""
    b1 = np.asarray(beta1, dtype=float)
    b2 = np.asarray(beta2, dtype=float)
    out = np.full(b1.shape, Region.OTHER.value, dtype=object)
    beta = (b2 >= b1 + 1.0 - INFEASIBLE_SLACK) & (b2 <= 3.0 + 1.5 * b1 + INFEASIBLE_SLACK)
    out[beta] = Region.BETA_REGION.value
    out[metric2_array(b1, b2) <= tol] = Region.NEAR_UNIFORM.value
    out[metric1_array(b1, b2) <= tol] = Region.NEAR_NORMAL.value
    out[b2 < b1 + 1.0 - INFEASIBLE_SLACK] = Region.INFEASIBLE.value
    return out
