"""
dataset.py: чтение суточных CSV (озон + погода) и построение таблицы предикторов:
- категориальные параметры бюллетеня приходят колонками `<param>@<interval_index>`
  с метками классов; каждый параметр превращается в колонку на класс с долей часов
  суток, проведённых в этом классе;
- строки с пропуском цели или предиктора пропускаются (без импутации) и попадают
  в отчёт загрузки;
- статистики нормализации считаются только по строкам обучения и применяются к
  валидации.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from datetime import date
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np
import pandas as pd
from pandas.errors import EmptyDataError
from scipy import linalg, stats

from ozonecast.common.text import interval_column, is_blank, parse_number, split_interval_column
from ozonecast.common.time import HOURS_PER_DAY, in_season, interval_bounds, parse_day
from ozonecast.errors import (
    ConfigError,
    ConstantColumn,
    EmptyFile,
    GroupTooSmall,
    InvalidIntervals,
    MalformedHeader,
    NoExceedances,
    TooFewRows,
    UnknownClassLabel,
    UnparsableDate,
    UnparsableNumber,
)

logger = logging.getLogger("ozonecast.dataset")

KIND_RAW = "raw"
KIND_FREQUENCY = "frequency"
KIND_PERSISTENCE = "persistence"

ROLE_TRAIN = "train"
ROLE_VALIDATION = "validation"


# ---------------------------------------------------------------------------
# МОДЕЛИ
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ClassInterval:
    start_hour: float
    end_hour: float
    label: str

    @property
    def hours(self) -> float:
        return self.end_hour - self.start_hour


@dataclass(frozen=True)
class RawRecord:
    date: date
    target_peak: Optional[float]  # суточный максимум часовых средних, µg m-3
    ozone_noon: float             # 12:00 дня выпуска, предиктор персистентности
    numeric_predictors: dict[str, float]
    categorical_predictors: dict[str, tuple[ClassInterval, ...]]
    row: int = 0                  # номер строки данных в файле, с 1


@dataclass(frozen=True)
class Schema:
    """Column roles of an input CSV."""

    date: str = "date"
    target: str = "peak"
    persistence: str = "ozone_noon"
    numeric: tuple[str, ...] = ()
    categorical: dict[str, tuple[str, ...]] = field(default_factory=dict)

    @classmethod
    def from_dict(cls, raw: dict) -> "Schema":
        return cls(
            date=raw.get("date", "date"),
            target=raw.get("target", "peak"),
            persistence=raw.get("persistence", "ozone_noon"),
            numeric=tuple(raw.get("numeric", ())),
            categorical={k: tuple(v) for k, v in (raw.get("categorical") or {}).items()},
        )

    def to_dict(self) -> dict:
        return {
            "date": self.date,
            "target": self.target,
            "persistence": self.persistence,
            "numeric": list(self.numeric),
            "categorical": {k: list(v) for k, v in self.categorical.items()},
        }


@dataclass(frozen=True)
class SkipEntry:
    row: int
    column: str
    reason: str


@dataclass
class LoadReport:
    path: str
    rows_read: int = 0
    out_of_season: int = 0
    skipped: list[SkipEntry] = field(default_factory=list)

    def lines(self) -> list[str]:
        out = [
            f"file {self.path}",
            f"rows_read {self.rows_read}",
            f"records {self.rows_read - len(self.skipped) - self.out_of_season}",
            f"out_of_season {self.out_of_season}",
            f"skipped {len(self.skipped)}",
        ]
        out.extend(f"skip row={s.row} column={s.column} reason={s.reason}" for s in self.skipped)
        return out


@dataclass
class LoadResult:
    records: list[RawRecord]
    report: LoadReport


@dataclass(frozen=True)
class Normalization:
    """Per-column affine map fitted on train rows: (x - center) / scale."""

    method: str  # "standard" | "minmax"
    columns: tuple[str, ...]
    centers: np.ndarray
    scales: np.ndarray

    def transform(self, values: np.ndarray) -> np.ndarray:
        return (np.asarray(values, dtype=float) - self.centers) / self.scales

    def inverse(self, values: np.ndarray) -> np.ndarray:
        return np.asarray(values, dtype=float) * self.scales + self.centers

    def apply(self, table: "FeatureTable") -> "FeatureTable":
        if tuple(table.columns) != tuple(self.columns):
            table = table.select(self.columns)
        return replace(table, values=self.transform(table.values), normalization=self)

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "columns": list(self.columns),
            "centers": [float(v) for v in self.centers],
            "scales": [float(v) for v in self.scales],
        }

    @classmethod
    def from_dict(cls, raw: dict) -> "Normalization":
        return cls(
            method=raw["method"],
            columns=tuple(raw["columns"]),
            centers=np.asarray(raw["centers"], dtype=float),
            scales=np.asarray(raw["scales"], dtype=float),
        )


@dataclass(frozen=True)
class FeatureTable:
    columns: tuple[str, ...]
    kinds: tuple[str, ...]
    values: np.ndarray                 # (строки, колонки)
    target: Optional[np.ndarray]       # (строки,) или None для таблиц прогноза
    dates: tuple[date, ...]
    role: str = ROLE_TRAIN
    normalization: Optional[Normalization] = None

    @property
    def n_rows(self) -> int:
        return int(self.values.shape[0])

    @property
    def n_columns(self) -> int:
        return int(self.values.shape[1])

    def column(self, name: str) -> np.ndarray:
        return self.values[:, self.columns.index(name)]

    def select(self, names: Sequence[str]) -> "FeatureTable":
        missing = [n for n in names if n not in self.columns]
        if missing:
            raise MalformedHeader(list(missing))
        idx = [self.columns.index(n) for n in names]
        return replace(
            self,
            columns=tuple(names),
            kinds=tuple(self.kinds[i] for i in idx),
            values=self.values[:, idx],
        )

    def rows(self, indices: Sequence[int]) -> "FeatureTable":
        idx = np.asarray(indices, dtype=int)
        return replace(
            self,
            values=self.values[idx],
            target=None if self.target is None else self.target[idx],
            dates=tuple(self.dates[i] for i in idx),
        )

    def with_role(self, role: str) -> "FeatureTable":
        return replace(self, role=role)


@dataclass(frozen=True)
class BalanceSpec:
    threshold: float
    a: float = 1.0
    b: float = 0.0125
    multiplier: int = 1

    def __post_init__(self) -> None:
        if not self.a > 0:
            raise ConfigError(f"balance: a must be > 0, got {self.a}")
        if self.b < 0:
            raise ConfigError(f"balance: b must be >= 0, got {self.b}")
        if int(self.multiplier) != self.multiplier or self.multiplier < 1:
            raise ConfigError(f"balance: multiplier must be a positive integer, got {self.multiplier}")

    def ratio(self) -> float:
        return self.a * math.exp(self.b * self.threshold)

    def kept_below(self, n_above: int, n_below: int) -> int:
        # round() округляет к чётному; множитель применяется к округлённому числу
        base = int(round(self.ratio() * n_above))
        return min(n_below, int(self.multiplier) * base)


@dataclass
class BalanceResult:
    records: list[RawRecord]
    kept_indices: list[int]
    n_above: int
    n_below_kept: int


@dataclass(frozen=True)
class AnovaResult:
    f_statistic: float
    p_value: float
    df_between: int
    df_within: int


# ---------------------------------------------------------------------------
# ЧТЕНИЕ CSV
# ---------------------------------------------------------------------------

def _interval_columns(header: Iterable[str], parameter: str) -> list[str]:
    found: dict[int, str] = {}
    for name in header:
        parsed = split_interval_column(name)
        if parsed and parsed[0] == parameter:
            found[parsed[1]] = name
    if not found:
        return []
    count = max(found) + 1
    return [found.get(i, interval_column(parameter, i)) for i in range(count)]


def _check_header(header: list[str], schema: Schema, require_target: bool) -> dict[str, list[str]]:
    required = [schema.date, schema.persistence, *schema.numeric]
    if require_target:
        required.insert(1, schema.target)
    missing = [c for c in required if c not in header]

    categorical_columns: dict[str, list[str]] = {}
    for parameter in schema.categorical:
        cols = _interval_columns(header, parameter)
        if not cols:
            missing.append(interval_column(parameter, 0))
            continue
        missing.extend(c for c in cols if c not in header)
        categorical_columns[parameter] = cols

    if missing:
        raise MalformedHeader(missing)
    return categorical_columns


def _number(row_no: int, column: str, cell: str) -> Optional[float]:
    try:
        return parse_number(cell)
    except ValueError:
        raise UnparsableNumber(row_no, column, cell) from None


def load_csv(
    path: str | Path,
    schema: Schema,
    require_target: bool = True,
    season_months: Optional[Iterable[int]] = None,
) -> LoadResult:
    path = Path(path)
    if not path.exists() or path.stat().st_size == 0:
        raise EmptyFile(str(path))
    try:
        frame = pd.read_csv(path, dtype=str, keep_default_na=False, skipinitialspace=True)
    except EmptyDataError:
        raise EmptyFile(str(path)) from None

    header = [str(c).strip() for c in frame.columns]
    frame.columns = header
    categorical_columns = _check_header(header, schema, require_target)
    if frame.empty:
        raise EmptyFile(str(path))

    months = tuple(season_months) if season_months is not None else None
    report = LoadReport(path=str(path))
    records: list[RawRecord] = []

    for row_no, row in enumerate(frame.to_dict(orient="records"), start=1):
        report.rows_read += 1

        raw_day = row[schema.date]
        if is_blank(raw_day):
            report.skipped.append(SkipEntry(row_no, schema.date, "missing"))
            continue
        day = parse_day(raw_day)
        if day is None:
            raise UnparsableDate(row_no, schema.date, raw_day)
        if months is not None and not in_season(day, months):
            report.out_of_season += 1
            continue

        target: Optional[float] = None
        if require_target or (schema.target in row and not is_blank(row.get(schema.target))):
            target = _number(row_no, schema.target, row.get(schema.target, ""))
            if target is None:
                report.skipped.append(SkipEntry(row_no, schema.target, "missing"))
                continue
            if target < 0:
                report.skipped.append(SkipEntry(row_no, schema.target, "negative"))
                continue

        persistence = _number(row_no, schema.persistence, row[schema.persistence])
        if persistence is None or persistence < 0:
            reason = "missing" if persistence is None else "negative"
            report.skipped.append(SkipEntry(row_no, schema.persistence, reason))
            continue

        numeric: dict[str, float] = {}
        skip: Optional[SkipEntry] = None
        for name in schema.numeric:
            value = _number(row_no, name, row[name])
            if value is None:
                skip = SkipEntry(row_no, name, "missing")
                break
            numeric[name] = value
        if skip is None:
            categorical: dict[str, tuple[ClassInterval, ...]] = {}
            for parameter, cols in categorical_columns.items():
                intervals = []
                for i, col in enumerate(cols):
                    label = row[col]
                    if is_blank(label):
                        skip = SkipEntry(row_no, col, "missing")
                        break
                    start, end = interval_bounds(i, len(cols))
                    intervals.append(ClassInterval(start, end, label.strip()))
                if skip is not None:
                    break
                categorical[parameter] = tuple(intervals)
        if skip is not None:
            report.skipped.append(skip)
            continue

        records.append(
            RawRecord(
                date=day,
                target_peak=target,
                ozone_noon=persistence,
                numeric_predictors=numeric,
                categorical_predictors=categorical,
                row=row_no,
            )
        )

    if report.skipped:
        logger.warning("%s: %d rows skipped (missing values)", path.name, len(report.skipped))
    logger.info("%s: %d records loaded from %d rows", path.name, len(records), report.rows_read)
    return LoadResult(records=records, report=report)


# ---------------------------------------------------------------------------
# ПРИЗНАКИ
# ---------------------------------------------------------------------------

def encode_class_frequencies(record: RawRecord, parameter: str, classes: Sequence[str]) -> np.ndarray:
    intervals = sorted(record.categorical_predictors[parameter], key=lambda iv: iv.start_hour)
    if not intervals:
        raise InvalidIntervals(f"{parameter}: no intervals on {record.date}")

    cursor = 0.0
    for iv in intervals:
        if abs(iv.start_hour - cursor) > 1e-9 or iv.end_hour <= iv.start_hour:
            raise InvalidIntervals(f"{parameter}: intervals do not tile the day on {record.date}")
        cursor = iv.end_hour
    if abs(cursor - HOURS_PER_DAY) > 1e-9:
        raise InvalidIntervals(f"{parameter}: intervals cover {cursor}h instead of 24h on {record.date}")

    position = {label: i for i, label in enumerate(classes)}
    hours = np.zeros(len(classes), dtype=float)
    for iv in intervals:
        if iv.label not in position:
            raise UnknownClassLabel(parameter, iv.label)
        hours[position[iv.label]] += iv.hours
    return hours / HOURS_PER_DAY


def frequency_column(parameter: str, label: str) -> str:
    return f"{parameter}={label}"


def build_feature_table(
    records: Sequence[RawRecord],
    schema: Schema,
    role: str = ROLE_TRAIN,
    drop_constant: bool = False,
) -> FeatureTable:
    columns: list[str] = [schema.persistence, *schema.numeric]
    kinds: list[str] = [KIND_PERSISTENCE] + [KIND_RAW] * len(schema.numeric)
    for parameter, classes in schema.categorical.items():
        columns.extend(frequency_column(parameter, label) for label in classes)
        kinds.extend([KIND_FREQUENCY] * len(classes))

    rows = []
    for rec in records:
        row = [rec.ozone_noon, *(rec.numeric_predictors[n] for n in schema.numeric)]
        for parameter, classes in schema.categorical.items():
            row.extend(encode_class_frequencies(rec, parameter, classes))
        rows.append(row)

    values = np.asarray(rows, dtype=float).reshape(len(rows), len(columns))
    has_target = all(rec.target_peak is not None for rec in records) and len(records) > 0
    target = np.asarray([rec.target_peak for rec in records], dtype=float) if has_target else None

    table = FeatureTable(
        columns=tuple(columns),
        kinds=tuple(kinds),
        values=values,
        target=target,
        dates=tuple(rec.date for rec in records),
        role=role,
    )
    if drop_constant:
        table, _ = drop_constant_columns(table)
    return table


def constant_columns(table: FeatureTable) -> list[str]:
    if table.n_rows == 0:
        return list(table.columns)
    spread = np.ptp(table.values, axis=0)
    return [name for name, s in zip(table.columns, spread) if s == 0]


def drop_constant_columns(table: FeatureTable) -> tuple[FeatureTable, list[str]]:
    dropped = constant_columns(table)
    if not dropped:
        return table, []
    logger.warning("Dropping constant columns: %s", ", ".join(dropped))
    keep = [c for c in table.columns if c not in dropped]
    return table.select(keep), dropped


def drop_reference_classes(table: FeatureTable, schema: Schema) -> tuple[FeatureTable, list[str]]:
    """Drop the last remaining class column of each categorical parameter; the rest sum to 1 - dropped."""
    dropped = []
    for parameter, classes in schema.categorical.items():
        present = [frequency_column(parameter, label) for label in classes if frequency_column(parameter, label) in table.columns]
        if present:
            dropped.append(present[-1])
    if not dropped:
        return table, []
    logger.info("Reference classes left out of the design: %s", ", ".join(dropped))
    return table.select([c for c in table.columns if c not in dropped]), dropped


def drop_collinear_columns(table: FeatureTable, tolerance: float = 1e-8) -> tuple[FeatureTable, list[str]]:
    """Drop columns that are exact linear combinations of the intercept and earlier-pivoted columns."""
    if table.n_rows == 0 or table.n_columns == 0:
        return table, []
    X = table.values - table.values.mean(axis=0)
    scale = np.abs(X).max(axis=0)
    scale[scale == 0] = 1.0
    _, R, perm = linalg.qr(X / scale, mode="economic", pivoting=True)
    diag = np.abs(np.diag(R))
    rank = int(np.sum(diag > tolerance * diag[0])) if diag.size and diag[0] > 0 else 0
    dropped = sorted((table.columns[int(k)] for k in perm[rank:]), key=table.columns.index)
    if not dropped:
        return table, []
    logger.warning("Dropping collinear columns: %s", ", ".join(dropped))
    return table.select([c for c in table.columns if c not in dropped]), dropped


def normalize_fit(table: FeatureTable, method: str = "standard") -> tuple[FeatureTable, Normalization]:
    if table.n_rows < 2:
        raise TooFewRows(f"normalization needs at least 2 rows, got {table.n_rows}")
    constant = constant_columns(table)
    if constant:
        raise ConstantColumn(constant[0])

    if method == "standard":
        centers = table.values.mean(axis=0)
        scales = table.values.std(axis=0, ddof=1)
    elif method == "minmax":
        centers = table.values.min(axis=0)
        scales = table.values.max(axis=0) - centers
    else:
        raise ConfigError(f"unknown normalization method {method!r}")

    stats_ = Normalization(method=method, columns=table.columns, centers=centers, scales=scales)
    return stats_.apply(table), stats_


# ---------------------------------------------------------------------------
# БАЛАНСИРОВКА И ДИАГНОСТИКА
# ---------------------------------------------------------------------------

def balance(records: Sequence[RawRecord], spec: BalanceSpec, seed: int) -> BalanceResult:
    above = [i for i, r in enumerate(records) if r.target_peak is not None and r.target_peak >= spec.threshold]
    below = [i for i, r in enumerate(records) if r.target_peak is not None and r.target_peak < spec.threshold]
    if not above:
        raise NoExceedances(f"no training day at or above {spec.threshold:g}")

    n_keep = spec.kept_below(len(above), len(below))
    rng = np.random.default_rng(seed)
    chosen = rng.choice(np.asarray(below, dtype=int), size=n_keep, replace=False) if n_keep else np.empty(0, int)

    kept = sorted(above + [int(i) for i in chosen])
    logger.info(
        "Balanced train set: %d above %.1f, %d of %d below kept (r=%.4f, multiplier=%d)",
        len(above), spec.threshold, n_keep, len(below), spec.ratio(), spec.multiplier,
    )
    return BalanceResult(
        records=[records[i] for i in kept],
        kept_indices=kept,
        n_above=len(above),
        n_below_kept=n_keep,
    )


def anova_check(group_a: Sequence[float], group_b: Sequence[float]) -> AnovaResult:
    a = np.asarray(group_a, dtype=float)
    b = np.asarray(group_b, dtype=float)
    if a.size < 2 or b.size < 2:
        raise GroupTooSmall(f"each group needs at least 2 values, got {a.size} and {b.size}")

    ssw = ((a - a.mean()) ** 2).sum() + ((b - b.mean()) ** 2).sum()
    df_within = a.size + b.size - 2

    if ssw == 0:
        # обе группы постоянны
        if a.mean() != b.mean():
            f_stat, p_value = math.inf, 0.0
        else:
            f_stat, p_value = math.nan, math.nan
    else:
        result = stats.f_oneway(a, b)
        f_stat, p_value = float(result.statistic), float(result.pvalue)
    return AnovaResult(f_statistic=f_stat, p_value=p_value, df_between=1, df_within=df_within)
