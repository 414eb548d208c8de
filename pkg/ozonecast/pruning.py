"""
pruning.py: критерий типа BIC, пошаговое удаление весов и перебор числа скрытых нейронов.

    BIC = ln(MSE) + W ln(N) / N          W = незамаскированные веса, N = оцениваемые строки

prune_step по очереди маскирует каждый активный вес (кроме смещений), коротко
дообучает и оставляет кандидата с наименьшим BIC, если тот не выше текущего.
Нейрон с замаскированным весом выхода теряет смещение и входные веса; нейрон со
всеми замаскированными входами константа и сворачивается в смещение выхода. Вход,
замаскированный во всех нейронах, считается исключённым.
"""

from __future__ import annotations

import logging
import math
import sys
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from ozonecast.common.logs import log_event
from ozonecast.common.parallel import parallel_map
from ozonecast.dataset import FeatureTable
from ozonecast.errors import ConfigError, NonFiniteCost, NonPositiveMse
from ozonecast.mlp import (
    OUTPUT_IDENTITY,
    Network,
    TrainConfig,
    mse,
    multistart,
    train_lm,
)

logger = logging.getLogger("ozonecast.pruning")

ITEM_WEIGHT = "weight"
ITEM_INPUT = "input"
ITEM_UNIT = "unit"

TINY_MSE = sys.float_info.min * sys.float_info.epsilon  # наименьший положительный double


@dataclass(frozen=True)
class BicValue:
    mse: float
    n: int
    w: int
    value: float


def bic(mse_value: float, n: int, w: int) -> float:
    if not mse_value > 0:
        raise NonPositiveMse(f"BIC needs mse > 0, got {mse_value}")
    if n < 1 or w < 0:
        raise ConfigError(f"BIC needs N >= 1 and W >= 0, got N={n}, W={w}")
    return math.log(mse_value) + w * math.log(n) / n


def network_bic(net: Network, table: FeatureTable) -> BicValue:
    """BIC of a network scored on `table`; an exact fit is clamped to the smallest positive mse."""
    value = mse(net, table.values, table.target)
    n, w = table.n_rows, net.active_count
    return BicValue(mse=value, n=n, w=w, value=bic(max(value, TINY_MSE), n, w))


@dataclass(frozen=True)
class PruneStep:
    step: int
    kind: str              # weight | input | unit
    item: str
    bic_before: float
    bic_after: float
    active_count: int


@dataclass
class PruneTrace:
    network: Network
    steps: list[PruneStep] = field(default_factory=list)
    eliminated_inputs: list[int] = field(default_factory=list)
    removed_units: list[int] = field(default_factory=list)

    @property
    def accepted(self) -> list[PruneStep]:
        return [s for s in self.steps if s.kind == ITEM_WEIGHT]


@dataclass
class PruneCandidate:
    network: Network
    bic: float
    weight_index: int
    removed_units: list[int]


def collapse_units(net: Network) -> tuple[Network, list[int]]:
    """Remove hidden units that can no longer contribute a non-constant term."""
    lay = net.layout
    w = net.weights.copy()
    mask = net.mask.copy()
    removed: list[int] = []

    for j in range(net.hidden_dim):
        out_k = lay.output_weight_index(j)
        bias_k = lay.hidden_bias_index(j)
        inputs = [lay.hidden_weight_index(j, i) for i in range(net.input_dim)]
        if not (mask[out_k] or mask[bias_k] or mask[inputs].any()):
            continue
        if not mask[out_k]:
            mask[[bias_k, *inputs]] = False
            removed.append(j)
        elif not mask[inputs].any():
            w[lay.output_bias] += w[out_k] * math.tanh(w[bias_k])
            mask[[bias_k, out_k]] = False
            removed.append(j)

    if not removed:
        return net, []
    return Network(net.input_dim, net.hidden_dim, np.where(mask, w, 0.0), mask, net.output_kind), removed


def drop_dead_units(net: Network) -> Network:
    """Rebuild the network without hidden units whose output weight is masked."""
    lay = net.layout
    live = net.live_units()
    if len(live) == net.hidden_dim:
        return net

    out = Network.zeros(net.input_dim, len(live), net.output_kind)
    new = out.layout
    w = np.zeros(new.n_params)
    mask = np.zeros(new.n_params, dtype=bool)
    for j_new, j in enumerate(live):
        src = [lay.hidden_bias_index(j), lay.output_weight_index(j)] + [lay.hidden_weight_index(j, i) for i in range(net.input_dim)]
        dst = [new.hidden_bias_index(j_new), new.output_weight_index(j_new)] + [
            new.hidden_weight_index(j_new, i) for i in range(net.input_dim)
        ]
        w[dst] = net.weights[src]
        mask[dst] = net.mask[src]
    w[new.output_bias] = net.weights[lay.output_bias]
    mask[new.output_bias] = net.mask[lay.output_bias]
    # живых нейронов нет: прямые веса входов раскладки без скрытого слоя остаются замаскированы
    return Network(net.input_dim, len(live), np.where(mask, w, 0.0), mask, net.output_kind)


def _prunable(net: Network) -> list[int]:
    lay = net.layout
    return [int(k) for k in net.active_indices if not lay.is_bias(int(k))]


def _candidate(
    net: Network,
    k: int,
    train: FeatureTable,
    cfg: TrainConfig,
    retrain_iterations: int,
) -> Optional[PruneCandidate]:
    mask = net.mask.copy()
    mask[k] = False
    reduced, removed = collapse_units(net.with_mask(mask))
    try:
        trained = train_lm(reduced, train, cfg, max_iterations=retrain_iterations).network
    except NonFiniteCost:
        return None
    return PruneCandidate(trained, network_bic(trained, train).value, k, removed)


def prune_step(
    net: Network,
    train: FeatureTable,
    cfg: TrainConfig,
    retrain_iterations: int = 50,
    fast: bool = False,
    n_jobs: Optional[int] = None,
) -> Optional[PruneCandidate]:
    """Best single-weight elimination, or None when every candidate raises the BIC."""
    indices = _prunable(net)
    if not indices:
        return None
    current = network_bic(net, train).value

    if fast:
        # только наименьший |w|
        indices = [min(indices, key=lambda k: (abs(net.weights[k]), k))]

    evaluated = parallel_map(lambda k: _candidate(net, k, train, cfg, retrain_iterations), indices, n_jobs=n_jobs)
    candidates = [c for c in evaluated if c is not None]
    if not candidates:
        return None

    best = min(candidates, key=lambda c: (c.bic, c.network.active_count, c.weight_index))
    if best.bic <= current:
        return best
    return None


def prune_to_minimal(
    net: Network,
    train: FeatureTable,
    cfg: TrainConfig,
    retrain_iterations: int = 50,
    fast: bool = False,
    n_jobs: Optional[int] = None,
    columns: Optional[Sequence[str]] = None,
) -> PruneTrace:
    columns = list(columns) if columns is not None else list(train.columns)
    trace = PruneTrace(network=net)
    current = network_bic(net, train).value
    step = 0

    while True:
        candidate = prune_step(trace.network, train, cfg, retrain_iterations, fast, n_jobs)
        if candidate is None:
            break
        step += 1
        before_inputs = set(trace.network.live_inputs())
        lay = trace.network.layout
        after = candidate.network

        trace.steps.append(
            PruneStep(step, ITEM_WEIGHT, lay.name(candidate.weight_index, columns), current, candidate.bic, after.active_count)
        )
        for j in candidate.removed_units:
            trace.steps.append(PruneStep(step, ITEM_UNIT, f"h{j}", current, candidate.bic, after.active_count))
            trace.removed_units.append(j)
        for i in sorted(before_inputs - set(after.live_inputs())):
            trace.steps.append(PruneStep(step, ITEM_INPUT, columns[i], current, candidate.bic, after.active_count))
            trace.eliminated_inputs.append(i)

        log_event(
            {
                "level": "info",
                "msg": "prune_step",
                "step": step,
                "item": lay.name(candidate.weight_index, columns),
                "bic_before": current,
                "bic_after": candidate.bic,
                "active": after.active_count,
            }
        )
        trace.network = after
        current = candidate.bic

    trace.network = drop_dead_units(trace.network)
    logger.info(
        "Pruning n=%d: %d steps, %d active weights, %d inputs eliminated",
        net.hidden_dim, step, trace.network.active_count, len(trace.eliminated_inputs),
    )
    return trace


# ---------------------------------------------------------------------------
# ПЕРЕБОР АРХИТЕКТУР
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CurvePoint:
    hidden_dim: int          # стартовое число нейронов
    bic: float
    train_bic: float
    active_count: int
    cost: float
    live_units: int = -1     # нейронов после прореживания; -1, если неизвестно

    def __post_init__(self) -> None:
        if self.live_units < 0:
            object.__setattr__(self, "live_units", self.hidden_dim)


@dataclass
class SelectionResult:
    sweep_dim: int
    curve: list[CurvePoint]
    networks: dict[int, Network]
    traces: dict[int, PruneTrace]

    @property
    def network(self) -> Network:
        return self.networks[self.sweep_dim]

    @property
    def trace(self) -> PruneTrace:
        return self.traces[self.sweep_dim]

    @property
    def hidden_dim(self) -> int:
        """Hidden units of the selected network once pruned units are gone."""
        return self.network.hidden_dim

    @property
    def point(self) -> CurvePoint:
        return next(p for p in self.curve if p.hidden_dim == self.sweep_dim)


def select_architecture(
    train: FeatureTable,
    validation: Optional[FeatureTable],
    hidden_range: Sequence[int],
    cfg: TrainConfig,
    retrain_iterations: int = 50,
    fast: bool = False,
    bic_on: str = "validation",
    output_kind: str = OUTPUT_IDENTITY,
    n_jobs: Optional[int] = None,
) -> SelectionResult:
    """
    Train, prune and score every hidden size of the sweep. The lowest BIC wins; ties
    go to fewer surviving units, then to the smaller starting size.
    """
    if not hidden_range:
        raise ConfigError("hidden unit range is empty")
    if 0 not in hidden_range:
        raise ConfigError("hidden unit range must include 0")
    if bic_on == "validation":
        if validation is None or validation.target is None:
            raise ConfigError("BIC on the validation set needs a validation table with targets")
        scored = validation
    elif bic_on == "train":
        scored = train
    else:
        raise ConfigError(f"bic_on must be 'validation' or 'train', got {bic_on!r}")

    curve: list[CurvePoint] = []
    networks: dict[int, Network] = {}
    traces: dict[int, PruneTrace] = {}

    for n in sorted(set(hidden_range)):
        start = multistart(train, n, cfg, output_kind=output_kind, n_jobs=n_jobs)
        trace = prune_to_minimal(start.network, train, cfg, retrain_iterations, fast, n_jobs)
        net = trace.network
        score = network_bic(net, scored)
        point = CurvePoint(
            hidden_dim=n,
            bic=score.value,
            train_bic=network_bic(net, train).value,
            active_count=net.active_count,
            cost=0.5 * mse(net, train.values, train.target) * train.n_rows,
            live_units=net.hidden_dim,
        )
        curve.append(point)
        networks[n] = net
        traces[n] = trace
        log_event(
            {
                "level": "info",
                "msg": "architecture",
                "hidden_dim": n,
                "live_units": net.hidden_dim,
                "bic": point.bic,
                "active": point.active_count,
            }
        )

    best = min(curve, key=lambda p: (p.bic, p.live_units, p.hidden_dim))
    logger.info(
        "Selected sweep point n=%d, %d live hidden units (BIC on %s = %.4f)",
        best.hidden_dim, best.live_units, bic_on, best.bic,
    )
    return SelectionResult(sweep_dim=best.hidden_dim, curve=curve, networks=networks, traces=traces)
