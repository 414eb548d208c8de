"""
baselines.py: эталонные модели, с которыми сравнивается сеть:
- PERS: пик завтра равен наблюдённому пику сегодня;
- LIN: МНК или ridge (XᵀX + λI)⁻¹XᵀY на стандартизованных предикторах, свободный
  член не штрафуется;
- логистическая регрессия (IRLS) с p-значениями Вальда по коэффициентам, девиансом
  и тестом отношения правдоподобия против модели только со свободным членом;
  ступенчатое исключение по p-значениям Вальда.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from datetime import date
from typing import Optional, Sequence

import numpy as np
from scipy import stats
from scipy.special import expit

from ozonecast.common.time import is_next_day
from ozonecast.errors import (
    ConfigError,
    DimensionMismatch,
    LengthMismatch,
    NoConvergence,
    PerfectSeparation,
    SingleClass,
    SingularDesign,
    TooShort,
)

logger = logging.getLogger("ozonecast.baselines")

KIND_OLS = "ols"
KIND_RIDGE = "ridge"

SEPARATION_NORM = 1e4
SEPARATION_RESIDUAL = 1e-3


# ---------------------------------------------------------------------------
# ПЕРСИСТЕНТНОСТЬ
# ---------------------------------------------------------------------------

def persistence_forecast(values: Sequence[float], dates: Optional[Sequence[date]] = None) -> np.ndarray:
    """forecast[d] = observed[d - 1]; NaN on the first day and after a calendar gap."""
    values = np.asarray(values, dtype=float)
    if values.size < 2:
        raise TooShort(f"persistence needs at least 2 days, got {values.size}")
    if dates is not None and len(dates) != values.size:
        raise LengthMismatch(f"{len(dates)} dates for {values.size} values")

    out = np.full(values.size, np.nan)
    out[1:] = values[:-1]
    if dates is not None:
        for i in range(1, values.size):
            if not is_next_day(dates[i - 1], dates[i]):
                out[i] = np.nan
    return out


# ---------------------------------------------------------------------------
# ЛИНЕЙНЫЕ МОДЕЛИ
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LinearModel:
    coefficients: np.ndarray
    intercept: float
    kind: str = KIND_OLS
    lam: float = 0.0
    columns: tuple[str, ...] = ()

    def to_dict(self) -> dict:
        return {
            "coefficients": [float(v) for v in self.coefficients],
            "intercept": float(self.intercept),
            "kind": self.kind,
            "lam": float(self.lam),
            "columns": list(self.columns),
        }

    @classmethod
    def from_dict(cls, raw: dict) -> "LinearModel":
        return cls(
            coefficients=np.asarray(raw["coefficients"], dtype=float),
            intercept=float(raw["intercept"]),
            kind=raw.get("kind", KIND_OLS),
            lam=float(raw.get("lam", 0.0)),
            columns=tuple(raw.get("columns", ())),
        )


def _design(X: np.ndarray, y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X.reshape(-1, 1)
    y = np.asarray(y, dtype=float).ravel()
    if X.shape[0] != y.size:
        raise LengthMismatch(f"{X.shape[0]} rows for {y.size} targets")
    return X, y


def ols_fit(X: np.ndarray, y: np.ndarray, columns: Sequence[str] = ()) -> LinearModel:
    X, y = _design(X, y)
    design = np.column_stack([np.ones(X.shape[0]), X])
    if X.shape[0] < design.shape[1] or np.linalg.matrix_rank(design) < design.shape[1]:
        raise SingularDesign(f"design of {X.shape[0]} rows x {X.shape[1]} columns is rank deficient")
    coef, *_ = np.linalg.lstsq(design, y, rcond=None)
    return LinearModel(coefficients=coef[1:], intercept=float(coef[0]), kind=KIND_OLS, columns=tuple(columns))


def ridge_fit(
    X: np.ndarray,
    y: np.ndarray,
    lam: float = 0.05,
    standardize: bool = True,
    fit_intercept: bool = True,
    columns: Sequence[str] = (),
) -> LinearModel:
    """
    (XᵀX + λI)⁻¹XᵀY. By default X is centered and scaled to unit sample std and Y
    centered, so λ is scale free and the intercept is not penalized; with both flags
    off the formula is applied to X and Y as given.
    """
    if lam < 0:
        raise ConfigError(f"ridge lambda must be >= 0, got {lam}")
    X, y = _design(X, y)
    p = X.shape[1]

    x_mean = X.mean(axis=0) if fit_intercept else np.zeros(p)
    y_mean = float(y.mean()) if fit_intercept else 0.0
    scale = np.ones(p)
    if standardize and X.shape[0] > 1:
        scale = X.std(axis=0, ddof=1)
        scale[scale == 0] = 1.0

    Xs = (X - x_mean) / scale
    try:
        b_scaled = np.linalg.solve(Xs.T @ Xs + lam * np.eye(p), Xs.T @ (y - y_mean))
    except np.linalg.LinAlgError:
        raise SingularDesign("ridge normal equations are singular (lambda = 0 on a rank-deficient design)") from None

    b = b_scaled / scale
    return LinearModel(
        coefficients=b,
        intercept=y_mean - float(x_mean @ b),
        kind=KIND_RIDGE,
        lam=float(lam),
        columns=tuple(columns),
    )


def predict_linear(model: LinearModel, X: np.ndarray) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X.reshape(1, -1)
    if X.shape[1] != model.coefficients.size:
        raise DimensionMismatch(f"model has {model.coefficients.size} coefficients, got {X.shape[1]} inputs")
    return model.intercept + X @ model.coefficients


# ---------------------------------------------------------------------------
# ЛОГИСТИЧЕСКАЯ РЕГРЕССИЯ
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LogisticModel:
    intercept: float
    coefficients: np.ndarray
    columns: tuple[str, ...] = ()
    standard_errors: np.ndarray = field(default_factory=lambda: np.zeros(0))   # свободный член первым
    p_values: np.ndarray = field(default_factory=lambda: np.zeros(0))          # свободный член первым
    deviance: float = 0.0
    null_deviance: float = 0.0
    model_p_value: float = 1.0
    iterations: int = 0

    @property
    def lr_statistic(self) -> float:
        return max(0.0, self.null_deviance - self.deviance)

    def coefficient_rows(self) -> list[tuple[str, float, float, float]]:
        """(name, estimate, standard error, p-value), intercept first."""
        names = ("intercept", *self.columns)
        estimates = (self.intercept, *self.coefficients)
        return [
            (name, float(est), float(se), float(p))
            for name, est, se, p in zip(names, estimates, self.standard_errors, self.p_values)
        ]

    def to_dict(self) -> dict:
        return {
            "intercept": float(self.intercept),
            "coefficients": [float(v) for v in self.coefficients],
            "columns": list(self.columns),
            "standard_errors": [float(v) for v in self.standard_errors],
            "p_values": [float(v) for v in self.p_values],
            "deviance": float(self.deviance),
            "null_deviance": float(self.null_deviance),
            "model_p_value": float(self.model_p_value),
            "iterations": self.iterations,
        }

    @classmethod
    def from_dict(cls, raw: dict) -> "LogisticModel":
        return cls(
            intercept=float(raw["intercept"]),
            coefficients=np.asarray(raw["coefficients"], dtype=float),
            columns=tuple(raw.get("columns", ())),
            standard_errors=np.asarray(raw.get("standard_errors", ()), dtype=float),
            p_values=np.asarray(raw.get("p_values", ()), dtype=float),
            deviance=float(raw.get("deviance", 0.0)),
            null_deviance=float(raw.get("null_deviance", 0.0)),
            model_p_value=float(raw.get("model_p_value", 1.0)),
            iterations=int(raw.get("iterations", 0)),
        )


@dataclass(frozen=True)
class StepwiseRemoval:
    step: int
    column: str
    p_value: float


def logistic_probabilities(model: LogisticModel, X: np.ndarray) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X.reshape(1, -1)
    if X.shape[1] != model.coefficients.size:
        raise DimensionMismatch(f"model has {model.coefficients.size} coefficients, got {X.shape[1]} inputs")
    return expit(model.intercept + X @ model.coefficients)


def logistic_predict(model: LogisticModel, x: Sequence[float]) -> float:
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise DimensionMismatch("logistic_predict takes a single input vector")
    return float(logistic_probabilities(model, x)[0])


def _log_likelihood(A: np.ndarray, y: np.ndarray, beta: np.ndarray) -> float:
    eta = A @ beta
    return float(np.sum(y * eta - np.logaddexp(0.0, eta)))


def logistic_fit(
    X: np.ndarray,
    y: Sequence[int],
    columns: Sequence[str] = (),
    max_iterations: int = 100,
    tolerance: float = 1e-8,
) -> LogisticModel:
    X, yv = _design(X, np.asarray(y, dtype=float))
    if not np.all((yv == 0) | (yv == 1)):
        raise ConfigError("logistic targets must be 0/1")
    n, p = X.shape
    rate = float(yv.mean()) if n else 0.0
    if n == 0 or rate in (0.0, 1.0):
        raise SingleClass("logistic regression needs both classes")

    A = np.column_stack([np.ones(n), X])
    beta = np.zeros(p + 1)
    beta[0] = math.log(rate / (1.0 - rate))
    ll = _log_likelihood(A, yv, beta)

    converged = False
    iterations = 0
    while iterations < max_iterations:
        iterations += 1
        mu = expit(A @ beta)
        weight = mu * (1.0 - mu)
        try:
            step = np.linalg.solve(A.T @ (weight[:, None] * A), A.T @ (yv - mu))
        except np.linalg.LinAlgError:
            raise SingularDesign("logistic information matrix is singular") from None

        # дробление шага: log-правдоподобие не убывает
        t = 1.0
        for _ in range(40):
            candidate = beta + t * step
            ll_new = _log_likelihood(A, yv, candidate)
            if ll_new >= ll - 1e-12 * abs(ll):
                break
            t *= 0.5
        beta, ll = candidate, ll_new

        if np.linalg.norm(beta) > SEPARATION_NORM or np.max(np.abs(yv - expit(A @ beta))) < SEPARATION_RESIDUAL:
            raise PerfectSeparation(f"classes are (quasi) separable after {iterations} IRLS iterations")
        if np.max(np.abs(t * step)) < tolerance:
            converged = True
            break

    if not converged:
        raise NoConvergence(iterations)

    mu = expit(A @ beta)
    info = A.T @ ((mu * (1.0 - mu))[:, None] * A)
    try:
        se = np.sqrt(np.diag(np.linalg.inv(info)))
    except np.linalg.LinAlgError:
        raise SingularDesign("logistic information matrix is singular at the optimum") from None
    p_values = 2.0 * stats.norm.sf(np.abs(beta / se))

    deviance = -2.0 * ll
    null_deviance = -2.0 * n * (rate * math.log(rate) + (1.0 - rate) * math.log(1.0 - rate))
    lr = max(0.0, null_deviance - deviance)
    model_p = float(stats.chi2.sf(lr, p)) if p > 0 else 1.0

    logger.debug("logistic fit: %d iterations, deviance=%.4f, null=%.4f", iterations, deviance, null_deviance)
    return LogisticModel(
        intercept=float(beta[0]),
        coefficients=beta[1:],
        columns=tuple(columns) if columns else tuple(f"x{i}" for i in range(p)),
        standard_errors=se,
        p_values=p_values,
        deviance=deviance,
        null_deviance=null_deviance,
        model_p_value=model_p,
        iterations=iterations,
    )


def logistic_stepwise(
    X: np.ndarray,
    y: Sequence[int],
    columns: Sequence[str] = (),
    keep_p: float = 0.05,
) -> tuple[LogisticModel, list[StepwiseRemoval]]:
    """Backward elimination: drop the least significant variable until every Wald p <= keep_p."""
    X, _ = _design(X, np.asarray(y, dtype=float))
    names = list(columns) if columns else [f"x{i}" for i in range(X.shape[1])]
    active = list(range(X.shape[1]))
    removed: list[StepwiseRemoval] = []

    while True:
        model = logistic_fit(X[:, active], y, [names[i] for i in active])
        if not active:
            break
        coefficient_p = model.p_values[1:]
        worst = int(np.argmax(coefficient_p))
        if coefficient_p[worst] <= keep_p:
            break
        removed.append(StepwiseRemoval(len(removed) + 1, names[active[worst]], float(coefficient_p[worst])))
        logger.debug("stepwise: removing %s (p=%.4f)", names[active[worst]], coefficient_p[worst])
        del active[worst]

    return model, removed
