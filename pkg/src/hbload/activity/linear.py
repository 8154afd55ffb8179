"""Multiple linear regression with residual diagnostics."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class RankDeficient(ValueError):
    pass


class DegenerateFit(ValueError):
    """Residual variance is zero, so residuals cannot be standardized."""


@dataclass(frozen=True, eq=False)
class LinearModel:
    coef: np.ndarray
    intercept: float
    fitted: np.ndarray
    residuals: np.ndarray
    leverage: np.ndarray
    feature_names: tuple[str, ...] = ()

    @property
    def n_obs(self) -> int:
        return int(self.residuals.size)

    @property
    def n_params(self) -> int:
        return int(self.coef.size) + 1

    @property
    def sse(self) -> float:
        return float(self.residuals @ self.residuals)

    def predict(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if X.ndim == 1:
            X = X[None, :]
        if X.shape[1] != self.coef.size:
            raise ValueError(f"expected {self.coef.size} features, got {X.shape[1]}")
        return X @ self.coef + self.intercept


def fit_linear(X, y, feature_names: tuple[str, ...] = ()) -> LinearModel:
    """Least squares with intercept, solved through a QR factorization.

    Raises:
        ValueError: fewer rows than columns + 2.
        RankDeficient: the design (with intercept) is not of full column rank.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float).ravel()
    if X.ndim == 1:
        X = X[:, None]
    n, p = X.shape
    if y.size != n:
        raise ValueError("X and y disagree in number of rows")
    if n <= p + 1:
        raise ValueError(f"need more than {p + 1} rows for {p} features, got {n}")
    A = np.column_stack([np.ones(n), X])
    Q, R = np.linalg.qr(A)
    sv = np.linalg.svd(R, compute_uv=False)
    if sv[-1] <= max(A.shape) * np.finfo(float).eps * sv[0]:
        raise RankDeficient("design matrix is rank deficient")
    beta = np.linalg.solve(R, Q.T @ y)
    fitted = A @ beta
    return LinearModel(
        coef=beta[1:],
        intercept=float(beta[0]),
        fitted=fitted,
        residuals=y - fitted,
        leverage=np.einsum("ij,ij->i", Q, Q),
        feature_names=tuple(feature_names),
    )


@dataclass(frozen=True, eq=False)
class ResidualDiagnostics:
    fitted: np.ndarray
    standardized: np.ndarray
    sqrt_abs_standardized: np.ndarray
    residual_se: float


def residual_diagnostics(model: LinearModel) -> ResidualDiagnostics:
    """Internally studentized residuals ``r / (s * sqrt(1 - h))`` against fitted values."""
    dof = model.n_obs - model.n_params
    s2 = model.sse / dof
    scale = np.abs(model.fitted).max() + 1.0
    if s2 <= (np.finfo(float).eps * scale) ** 2:
        raise DegenerateFit("residual variance is zero (perfect fit)")
    s = float(np.sqrt(s2))
    denom = s * np.sqrt(np.clip(1.0 - model.leverage, 0.0, None))
    std = np.divide(model.residuals, denom, out=np.zeros_like(denom), where=denom > 0)
    return ResidualDiagnostics(model.fitted, std, np.sqrt(np.abs(std)), s)
