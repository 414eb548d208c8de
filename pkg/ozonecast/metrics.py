"""
metrics.py: верификация прогноза.

Общее согласие (P прогнозы, O наблюдения):
    MBE = mean(P - O)     MAE = mean|P - O|     RMSE = sqrt(mean (P - O)^2)
    P^ = b0 + b1 O (МНК регрессия P на O)
    RMSE_s = sqrt(mean (P^ - O)^2)   RMSE_u = sqrt(mean (P^ - P)^2)   RMSE^2 = RMSE_s^2 + RMSE_u^2
    d = 1 - sum (P - O)^2 / sum (|P - mean O| + |O - mean O|)^2

Превышения по таблице сопряжённости A (попадания), F (прогнозы), M (наблюдения), N (дни):
    TPR = A / M     FAR = (F - A) / (N - M)     SI = TPR - FAR
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Optional, Sequence

import numpy as np

from ozonecast.common.text import format_number
from ozonecast.errors import AllExceedances, ConstantObservations, LengthMismatch, NoObservedExceedances, TooShort

REPORT_COLUMNS = ("MBE", "MAE", "RMSE", "RMSE_s", "RMSE_u", "d", "FAR", "SI")

# точность вывода: индексы в µg m-3 целыми, безразмерные с 2 знаками
REPORT_DIGITS = {"MBE": 0, "MAE": 0, "RMSE": 0, "RMSE_s": 0, "RMSE_u": 0, "d": 2, "FAR": 2, "SI": 2}

RESIDUAL_BAND = 2.0


@dataclass(frozen=True)
class FitReport:
    n: int
    mbe: float
    mae: float
    rmse: float
    rmse_s: float
    rmse_u: float
    d: float
    b0: float
    b1: float
    b1_se: float


@dataclass(frozen=True)
class ContingencyTable:
    a: int
    f: int
    m: int
    n: int


@dataclass(frozen=True)
class ExceedanceReport:
    tpr: float
    far: float
    si: float


@dataclass(frozen=True)
class ReportRow:
    model: str
    fit: Optional[FitReport] = None
    table: Optional[ContingencyTable] = None
    exceedance: Optional[ExceedanceReport] = None

    def values(self) -> dict[str, Optional[float]]:
        fit, exc = self.fit, self.exceedance
        return {
            "MBE": fit.mbe if fit else None,
            "MAE": fit.mae if fit else None,
            "RMSE": fit.rmse if fit else None,
            "RMSE_s": fit.rmse_s if fit else None,
            "RMSE_u": fit.rmse_u if fit else None,
            "d": fit.d if fit else None,
            "FAR": exc.far if exc else None,
            "SI": exc.si if exc else None,
        }

    def formatted(self) -> list[str]:
        values = self.values()
        return [self.model] + [format_number(values[c], REPORT_DIGITS[c]) for c in REPORT_COLUMNS]

    def to_dict(self) -> dict:
        return {
            "model": self.model,
            "fit": asdict(self.fit) if self.fit else None,
            "contingency": asdict(self.table) if self.table else None,
            "exceedance": asdict(self.exceedance) if self.exceedance else None,
        }


def _pair(P: Sequence[float], O: Sequence[float]) -> tuple[np.ndarray, np.ndarray]:
    p = np.asarray(P, dtype=float)
    o = np.asarray(O, dtype=float)
    if p.shape != o.shape:
        raise LengthMismatch(f"{p.size} predictions for {o.size} observations")
    if p.size < 2:
        raise TooShort(f"need at least 2 forecast/observation pairs, got {p.size}")
    return p, o


def global_fit_report(P: Sequence[float], O: Sequence[float]) -> FitReport:
    p, o = _pair(P, O)
    n = p.size
    o_mean = o.mean()
    sxx = float(np.sum((o - o_mean) ** 2))
    if sxx == 0.0:
        raise ConstantObservations("observations are constant: agreement index and P-on-O regression undefined")

    err = p - o
    b1 = float(np.sum((o - o_mean) * (p - p.mean())) / sxx)
    b0 = float(p.mean() - b1 * o_mean)
    fitted = b0 + b1 * o

    residual_ss = float(np.sum((p - fitted) ** 2))
    b1_se = math.sqrt(residual_ss / (n - 2) / sxx) if n > 2 else math.nan

    potential = float(np.sum((np.abs(p - o_mean) + np.abs(o - o_mean)) ** 2))
    return FitReport(
        n=n,
        mbe=float(err.mean()),
        mae=float(np.abs(err).mean()),
        rmse=math.sqrt(float(np.mean(err**2))),
        rmse_s=math.sqrt(float(np.mean((fitted - o) ** 2))),
        rmse_u=math.sqrt(residual_ss / n),
        d=1.0 - float(np.sum(err**2)) / potential,
        b0=b0,
        b1=b1,
        b1_se=b1_se,
    )


def contingency(predicted: Sequence[bool], observed: Sequence[bool]) -> ContingencyTable:
    pf = np.asarray(predicted, dtype=bool)
    of = np.asarray(observed, dtype=bool)
    if pf.shape != of.shape:
        raise LengthMismatch(f"{pf.size} predicted flags for {of.size} observed flags")
    return ContingencyTable(a=int(np.sum(pf & of)), f=int(pf.sum()), m=int(of.sum()), n=int(of.size))


def exceedance_report(table: ContingencyTable) -> ExceedanceReport:
    if table.m < 1:
        raise NoObservedExceedances("no observed exceedance: TPR undefined")
    if table.n <= table.m:
        raise AllExceedances("every day is an exceedance: FAR undefined")
    tpr = table.a / table.m
    far = (table.f - table.a) / (table.n - table.m)
    return ExceedanceReport(tpr=tpr, far=far, si=tpr - far)


def standardized_residuals(P: Sequence[float], O: Sequence[float]) -> np.ndarray:
    p, o = _pair(P, O)
    s = float(np.std(o, ddof=1))
    if s == 0.0:
        raise ConstantObservations("observations are constant: residuals cannot be standardized")
    return (p - o) / s


def flag_residuals(residuals: Sequence[float], band: float = RESIDUAL_BAND) -> list[int]:
    """Row indices whose standardized residual falls outside +/- band."""
    r = np.asarray(residuals, dtype=float)
    return [int(i) for i in np.flatnonzero(np.abs(r) > band)]
