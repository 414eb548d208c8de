"""
classifier.py: сеть с сигмоидным выходом, выход читается как вероятность превышения.

Цели обучения p_i = 1 для дней с превышением: по наблюдённым пикам либо по верхней
границе интервала регрессионной сети. Используется та же машинерия (LM,
мультистарт, прореживание), сигмоида применяется ко всему аффинному выходу, поэтому
вероятности лежат в (0, 1). Входы масштабируются min-max в [0, 1] по строкам обучения.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from ozonecast.dataset import FeatureTable, RawRecord
from ozonecast.errors import (
    ConfigError,
    DimensionMismatch,
    MissingRegressionContext,
    OutOfDomain,
    SingleClass,
    WrongOutputKind,
)
from ozonecast.mlp import OUTPUT_SIGMOID, Network, TrainConfig, multistart, predict
from ozonecast.pruning import PruneTrace, prune_to_minimal
from ozonecast.uncertainty import IntervalContext, PredictionInterval, exceedance_by_interval, prediction_interval

logger = logging.getLogger("ozonecast.classifier")

TARGET_OBSERVED = "observed"
TARGET_INTERVAL = "interval"
DECISION_THRESHOLD = 0.5


@dataclass(frozen=True)
class ExceedanceTargets:
    values: np.ndarray      # 0/1 на каждую строку обучения
    mode: str

    @property
    def positives(self) -> int:
        return int(self.values.sum())

    @property
    def single_class(self) -> bool:
        return self.positives in (0, self.values.size)


@dataclass(frozen=True)
class ProbabilityForecast:
    probability: float
    threshold: float
    decision: bool


@dataclass
class ClassifierResult:
    network: Network
    cost: float
    cost_trace: list[float]
    trace: Optional[PruneTrace] = None
    restart_costs: list[Optional[float]] = field(default_factory=list)


def make_targets(
    records: Sequence[RawRecord],
    threshold: float,
    mode: str = TARGET_OBSERVED,
    regression: Optional[Network] = None,
    context: Optional[IntervalContext] = None,
    features: Optional[np.ndarray] = None,
    alpha: float = 0.05,
    intervals: Optional[Sequence[PredictionInterval]] = None,
) -> ExceedanceTargets:
    """
    observed: p_i = 1 iff the observed peak >= threshold.
    interval: p_i = 1 iff the regression point + half width >= threshold; `intervals`
    may be given directly, otherwise they are computed from `regression`, `context`
    and the regression-normalized `features` (one row per record).
    """
    if mode == TARGET_OBSERVED:
        values = np.asarray([1 if r.target_peak >= threshold else 0 for r in records], dtype=int)
    elif mode == TARGET_INTERVAL:
        if intervals is None:
            if regression is None or context is None or features is None:
                raise MissingRegressionContext(
                    "interval-augmented targets need a trained regression network with its interval context"
                )
            features = np.asarray(features, dtype=float)
            if features.shape[0] != len(records):
                raise DimensionMismatch(f"{features.shape[0]} feature rows for {len(records)} records")
            intervals = [prediction_interval(regression, context, row, alpha) for row in features]
        if len(intervals) != len(records):
            raise DimensionMismatch(f"{len(intervals)} intervals for {len(records)} records")
        values = np.asarray([1 if exceedance_by_interval(iv, threshold) else 0 for iv in intervals], dtype=int)
    else:
        raise ConfigError(f"unknown target mode {mode!r}")

    targets = ExceedanceTargets(values=values, mode=mode)
    if targets.single_class:
        logger.warning(
            "Classifier targets (%s mode, threshold %.1f) hold a single class: %d of %d positive",
            mode, threshold, targets.positives, values.size,
        )
    return targets


def forward_classifier(net: Network, x: Sequence[float]) -> float:
    if net.output_kind != OUTPUT_SIGMOID:
        raise WrongOutputKind("forward_classifier() needs a sigmoid-output network")
    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or x.size != net.input_dim:
        raise DimensionMismatch(f"network expects {net.input_dim} inputs, got {x.size}")
    return float(predict(net, x)[0])


def train_classifier(
    train: FeatureTable,
    targets: ExceedanceTargets | Sequence[int],
    cfg: TrainConfig,
    hidden_dim: int,
    mask: Optional[np.ndarray] = None,
    prune: bool = False,
    retrain_iterations: int = 50,
    fast: bool = False,
    n_jobs: Optional[int] = None,
) -> ClassifierResult:
    """Same structure as the selected regression network: `hidden_dim` and, optionally, its mask."""
    values = targets.values if isinstance(targets, ExceedanceTargets) else np.asarray(targets, dtype=int)
    if values.size != train.n_rows:
        raise DimensionMismatch(f"{values.size} targets for {train.n_rows} train rows")
    if values.size == 0 or values.min() == values.max():
        raise SingleClass("classifier training needs both exceedance and non-exceedance days")

    table = FeatureTable(
        columns=train.columns,
        kinds=train.kinds,
        values=train.values,
        target=values.astype(float),
        dates=train.dates,
        role=train.role,
        normalization=train.normalization,
    )
    start = multistart(table, hidden_dim, cfg, output_kind=OUTPUT_SIGMOID, mask=mask, n_jobs=n_jobs)
    net = start.network
    trace = None
    if prune:
        trace = prune_to_minimal(net, table, cfg, retrain_iterations, fast, n_jobs)
        net = trace.network

    fitted = predict(net, table.values)
    accuracy = float(np.mean((fitted >= DECISION_THRESHOLD) == (values == 1)))
    logger.info(
        "Classifier n=%d trained: cost=%.6g, %d active weights, train accuracy %.3f",
        hidden_dim, start.cost, net.active_count, accuracy,
    )
    return ClassifierResult(
        network=net,
        cost=start.cost,
        cost_trace=start.cost_trace,
        trace=trace,
        restart_costs=start.restart_costs,
    )


def decide(probability: float, threshold: float = DECISION_THRESHOLD) -> bool:
    if not 0.0 <= probability <= 1.0:
        raise OutOfDomain(f"probability must be in [0, 1], got {probability}")
    return probability >= threshold


def forecast_probabilities(
    net: Network,
    X: np.ndarray,
    threshold: float = DECISION_THRESHOLD,
) -> list[ProbabilityForecast]:
    if net.output_kind != OUTPUT_SIGMOID:
        raise WrongOutputKind("probability forecasts need a sigmoid-output network")
    probs = predict(net, X)
    return [ProbabilityForecast(float(p), threshold, decide(float(p), threshold)) for p in probs]
