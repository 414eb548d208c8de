"""
uncertainty.py: leverage и интервалы прогноза по градиентам выхода.

    Z   = градиенты выхода модели по строкам обучения (N x q)
    h_ii = z_i' (Z'Z)^-1 z_i
    S   = sqrt(sum R_i^2 / (N - q))
    x  -> point +/- t(1 - alpha/2; N - q) * S * sqrt(z' (Z'Z)^-1 z [+ 1])

Z'Z не обращается: Z один раз раскладывается QR с выбором столбцов, в файл модели
кэшируется фактор R вместе с перестановкой.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy import linalg, stats

from ozonecast.dataset import FeatureTable
from ozonecast.errors import DimensionMismatch, DofExhausted, OutOfDomain, RankDeficient
from ozonecast.mlp import Network, forward, jacobian, jacobian_matrix, predict

logger = logging.getLogger("ozonecast.uncertainty")

PIVOT_TOLERANCE = 1e-10


@dataclass(frozen=True)
class LeverageSet:
    leverages: np.ndarray
    gram: np.ndarray
    r_factor: np.ndarray
    permutation: np.ndarray
    q: int
    n: int


@dataclass(frozen=True)
class IntervalContext:
    r_factor: np.ndarray
    permutation: np.ndarray
    residual_std: float
    n: int
    q: int
    noise: bool = False

    @property
    def dof(self) -> int:
        return self.n - self.q

    def quadratic(self, z: np.ndarray) -> float:
        """z' (Z'Z)^-1 z from the cached R factor."""
        z = np.asarray(z, dtype=float)
        if z.shape != (self.q,):
            raise DimensionMismatch(f"gradient has {z.size} entries, interval context expects {self.q}")
        v = linalg.solve_triangular(self.r_factor, z[self.permutation], trans="T")
        return float(v @ v)

    def to_dict(self) -> dict:
        return {
            "r_factor": [[float(v) for v in row] for row in self.r_factor],
            "permutation": [int(v) for v in self.permutation],
            "residual_std": float(self.residual_std),
            "n": self.n,
            "q": self.q,
            "noise": self.noise,
        }

    @classmethod
    def from_dict(cls, raw: dict) -> "IntervalContext":
        return cls(
            r_factor=np.asarray(raw["r_factor"], dtype=float).reshape(raw["q"], raw["q"]),
            permutation=np.asarray(raw["permutation"], dtype=int),
            residual_std=float(raw["residual_std"]),
            n=int(raw["n"]),
            q=int(raw["q"]),
            noise=bool(raw.get("noise", False)),
        )


@dataclass(frozen=True)
class PredictionInterval:
    point: float
    half_width: float
    alpha: float
    dof: int

    @property
    def lower(self) -> float:
        return self.point - self.half_width

    @property
    def upper(self) -> float:
        return self.point + self.half_width


def leverages(net: Network, train: FeatureTable) -> LeverageSet:
    Z = jacobian_matrix(net, train.values)
    n, q = Z.shape
    if n < q:
        raise RankDeficient(n, q)

    Q, R, perm = linalg.qr(Z, mode="economic", pivoting=True)
    diag = np.abs(np.diag(R))
    rank = int(np.sum(diag > PIVOT_TOLERANCE * diag[0])) if diag.size and diag[0] > 0 else 0
    if rank < q:
        raise RankDeficient(rank, q)

    h = np.sum(Q**2, axis=1)
    return LeverageSet(leverages=h, gram=Z.T @ Z, r_factor=R, permutation=perm, q=q, n=n)


def residual_std(net: Network, train: FeatureTable, q: int) -> float:
    n = train.n_rows
    if n <= q:
        raise DofExhausted(f"N={n} rows leave no degrees of freedom for q={q} parameters")
    r = train.target - predict(net, train.values)
    return math.sqrt(float(r @ r) / (n - q))


def student_t_quantile(prob: float, dof: float) -> float:
    if not 0 < prob < 1:
        raise OutOfDomain(f"probability must be in (0, 1), got {prob}")
    if not dof >= 1:
        raise OutOfDomain(f"degrees of freedom must be >= 1, got {dof}")
    return float(stats.t.ppf(prob, dof))


def interval_context(
    net: Network,
    train: FeatureTable,
    noise: bool = False,
    lev: Optional[LeverageSet] = None,
) -> IntervalContext:
    lev = leverages(net, train) if lev is None else lev
    s = residual_std(net, train, lev.q)
    return IntervalContext(
        r_factor=lev.r_factor,
        permutation=lev.permutation,
        residual_std=s,
        n=lev.n,
        q=lev.q,
        noise=noise,
    )


def prediction_interval(
    net: Network,
    context: IntervalContext,
    x: Sequence[float],
    alpha: float = 0.05,
) -> PredictionInterval:
    if context.dof < 1:
        raise DofExhausted(f"N={context.n} rows leave no degrees of freedom for q={context.q} parameters")
    point = forward(net, x)
    term = context.quadratic(jacobian(net, x)) + (1.0 if context.noise else 0.0)
    t = student_t_quantile(1.0 - alpha / 2.0, context.dof)
    return PredictionInterval(
        point=point,
        half_width=t * context.residual_std * math.sqrt(term),
        alpha=alpha,
        dof=context.dof,
    )


def prediction_intervals(
    net: Network,
    context: IntervalContext,
    X: np.ndarray,
    alpha: float = 0.05,
) -> list[PredictionInterval]:
    return [prediction_interval(net, context, row, alpha) for row in np.asarray(X, dtype=float)]


def exceedance_by_interval(interval: PredictionInterval, threshold: float) -> bool:
    return interval.point + interval.half_width >= threshold
