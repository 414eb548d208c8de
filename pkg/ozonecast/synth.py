"""
synth.py: синтетические сезоны озона в формате реальных входных данных.

Скрытый суточный "фотохимический режим" (AR(1), высокий = солнечно, тепло, штиль)
управляет и бюллетенем, и пиком:

    peak(D+1) = 95 + 45 tanh(u) + 0.35 (peak(D) - 95) + noise
    u = 0.9 regime + 0.25 (t_max - 25) / 5 - 0.2 wind - 0.15 cloud

Категориальные параметры бюллетеня: восемь 3-часовых интервалов в сутки. Каждая
выборка сдвигается на константу, чтобы в ней было ровно заданное число дней на
пороге или выше.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np
import pandas as pd

from ozonecast.common.text import interval_column
from ozonecast.common.time import DEFAULT_SEASON_MONTHS, format_day, season_dates
from ozonecast.dataset import Schema
from ozonecast.errors import ConfigError

logger = logging.getLogger("ozonecast.synth")

INTERVALS_PER_DAY = 8

CLOUDINESS = ("clear", "few", "scattered", "broken", "overcast", "fog")
RAINFALL = tuple(f"r{i}" for i in range(10))
WIND_SPEED = tuple(f"ws{i}" for i in range(6))
WIND_DIRECTION = ("N", "NE", "E", "SE", "S", "SW", "W", "NW")

NUMERIC = ("t_min", "t_max", "t_grad")


@dataclass(frozen=True)
class SynthSpec:
    n_train: int = 600
    n_validation: int = 105
    train_exceedances: int = 12
    validation_exceedances: int = 7
    threshold: float = 180.0
    start_year: int = 1999
    seed: int = 0
    forecast_days: int = 7

    def __post_init__(self) -> None:
        if self.n_train < 10 or self.n_validation < 2:
            raise ConfigError("synthetic season needs at least 10 train and 2 validation days")
        if not 0 <= self.train_exceedances < self.n_train:
            raise ConfigError("train_exceedances must be in [0, n_train)")
        if not 0 <= self.validation_exceedances < self.n_validation:
            raise ConfigError("validation_exceedances must be in [0, n_validation)")
        if not 0 <= self.forecast_days <= self.n_validation:
            raise ConfigError("forecast_days must be in [0, n_validation]")


def synth_schema() -> Schema:
    return Schema(
        date="date",
        target="peak",
        persistence="ozone_noon",
        numeric=NUMERIC,
        categorical={
            "cloud": CLOUDINESS,
            "rain": RAINFALL,
            "wspeed": WIND_SPEED,
            "wdir": WIND_DIRECTION,
        },
    )


def _classes(rng: np.random.Generator, center: np.ndarray, spread: float, n_classes: int) -> np.ndarray:
    """Per-interval class indices scattered around a daily center."""
    raw = center[:, None] + rng.normal(0.0, spread, (center.size, INTERVALS_PER_DAY))
    return np.clip(np.rint(raw), 0, n_classes - 1).astype(int)


def _plant(peaks: np.ndarray, count: int, threshold: float) -> np.ndarray:
    """Shift so exactly `count` values are >= threshold."""
    ordered = np.sort(peaks)[::-1]
    if count == 0:
        level = ordered[0] + 1.0
    else:
        level = ordered[count - 1] if count == peaks.size else 0.5 * (ordered[count - 1] + ordered[count])
        if count < peaks.size and ordered[count - 1] == ordered[count]:
            raise ConfigError("tied peaks: cannot plant an exact exceedance count")
    shifted = peaks + (threshold - level)
    if count == 0:
        shifted = shifted - 1.0
    return np.maximum(shifted, 0.0)


def generate(spec: SynthSpec) -> tuple[pd.DataFrame, pd.DataFrame]:
    """(train, validation) frames in the CSV layout `load_csv` reads."""
    rng = np.random.default_rng(spec.seed)
    n = spec.n_train + spec.n_validation + 1          # +1: день перед первой строкой
    days = season_dates(spec.start_year, n, DEFAULT_SEASON_MONTHS)

    regime = np.zeros(n)
    for t in range(1, n):
        regime[t] = 0.8 * regime[t - 1] + 0.6 * rng.normal()

    t_max = 25.0 + 5.0 * regime + rng.normal(0.0, 2.0, n)
    t_min = t_max - 10.0 - 2.0 * regime + rng.normal(0.0, 1.5, n)
    t_grad = 0.5 * regime + rng.normal(0.0, 1.0, n)

    cloud = _classes(rng, 2.5 - 1.5 * regime, 0.8, len(CLOUDINESS))
    rain = _classes(rng, np.maximum(0.0, -2.0 * regime), 1.0, len(RAINFALL))
    wspeed = _classes(rng, 2.5 - 1.0 * regime, 0.8, len(WIND_SPEED))
    heading = np.cumsum(rng.integers(-1, 2, n)) % len(WIND_DIRECTION)
    wdir = (heading[:, None] + rng.integers(-1, 2, (n, INTERVALS_PER_DAY))) % len(WIND_DIRECTION)

    u = 0.9 * regime + 0.25 * (t_max - 25.0) / 5.0 - 0.2 * (wspeed.mean(axis=1) - 2.5) - 0.15 * (cloud.mean(axis=1) - 2.5)
    peaks = np.zeros(n)
    peaks[0] = 95.0
    for t in range(1, n):
        peaks[t] = 95.0 + 45.0 * np.tanh(u[t]) + 0.35 * (peaks[t - 1] - 95.0) + rng.normal(0.0, 10.0)
    noon = np.maximum(0.0, 0.8 * peaks + rng.normal(0.0, 8.0, n))

    rows = []
    for t in range(1, n):
        row = {
            "date": format_day(days[t]),
            "peak": peaks[t],
            "ozone_noon": noon[t - 1],
            "t_min": t_min[t],
            "t_max": t_max[t],
            "t_grad": t_grad[t],
        }
        for k in range(INTERVALS_PER_DAY):
            row[interval_column("cloud", k)] = CLOUDINESS[cloud[t, k]]
            row[interval_column("rain", k)] = RAINFALL[rain[t, k]]
            row[interval_column("wspeed", k)] = WIND_SPEED[wspeed[t, k]]
            row[interval_column("wdir", k)] = WIND_DIRECTION[wdir[t, k]]
        rows.append(row)

    frame = pd.DataFrame(rows)
    train = frame.iloc[: spec.n_train].reset_index(drop=True)
    validation = frame.iloc[spec.n_train :].reset_index(drop=True)
    train["peak"] = _plant(train["peak"].to_numpy(), spec.train_exceedances, spec.threshold)
    validation["peak"] = _plant(validation["peak"].to_numpy(), spec.validation_exceedances, spec.threshold)

    for part in (train, validation):
        for col in ("peak", "ozone_noon", *NUMERIC):
            part[col] = part[col].round(3)
    return train, validation


def write_season(
    out_dir: str | Path,
    spec: SynthSpec,
    config_overrides: Optional[dict] = None,
) -> dict[str, Path]:
    """Write train.csv, validation.csv, forecast.csv and a ready-to-run config.json."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    train, validation = generate(spec)

    paths = {
        "train": out / "train.csv",
        "validation": out / "validation.csv",
        "forecast": out / "forecast.csv",
        "config": out / "config.json",
    }
    train.to_csv(paths["train"], index=False, lineterminator="\n")
    validation.to_csv(paths["validation"], index=False, lineterminator="\n")
    tail = validation.tail(spec.forecast_days).drop(columns=["peak"])
    tail.to_csv(paths["forecast"], index=False, lineterminator="\n")

    config = {
        "train_csv": "train.csv",
        "validation_csv": "validation.csv",
        "model_path": "models/ozonecast.json",
        "output_dir": "out",
        "archive_csv": "archive.csv",
        "schema": synth_schema().to_dict(),
        "threshold": spec.threshold,
        "seed": spec.seed,
        "hidden_range": [0, 1, 2],
        "fast_prune": True,
    }
    config.update(config_overrides or {})
    paths["config"].write_text(json.dumps(config, sort_keys=True, indent=2) + "\n", encoding="utf-8")

    logger.info(
        "Synthetic season written to %s: %d train (%d exceedances), %d validation (%d exceedances)",
        out, spec.n_train, spec.train_exceedances, spec.n_validation, spec.validation_exceedances,
    )
    return paths
