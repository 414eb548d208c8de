"""
mlp.py: перцептрон с одним скрытым слоем tanh.

    y = w0 + sum_j v_j * tanh(b_j + sum_i W_ji x_i)            (линейный выход)
    y = sigmoid(тот же аффинный выход)                          (сигмоидный выход)

Плоский порядок весов (его же используют файлы модели):
    смещения скрытых b_j | веса W построчно | смещение выхода w0 | веса выхода v_j
    | прямые веса входов (только при hidden_dim == 0: множественная линейная регрессия)

Замаскированные веса заморожены ровно в 0. Обучение: Левенберг-Марквардт по
незамаскированным весам; мультистарт запускает независимые рестарты с сидами и
оставляет наименьшую итоговую стоимость, при равенстве меньший индекс рестарта.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np
from scipy.special import expit, logit

from ozonecast.common.parallel import parallel_map
from ozonecast.dataset import FeatureTable
from ozonecast.errors import ConfigError, DimensionMismatch, NonFiniteCost, SingularDesign, WrongOutputKind

logger = logging.getLogger("ozonecast.mlp")

OUTPUT_IDENTITY = "identity"
OUTPUT_SIGMOID = "sigmoid"

LOSS_SQUARED = "squared"
LOSS_CROSS_ENTROPY = "cross_entropy"

INIT_NOISE_STD = 0.01
RANDOM_INIT_RANGE = 0.5


# ---------------------------------------------------------------------------
# РАСКЛАДКА ВЕСОВ И СЕТЬ
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Layout:
    input_dim: int
    hidden_dim: int

    @property
    def hidden_bias(self) -> slice:
        return slice(0, self.hidden_dim)

    @property
    def hidden_weights(self) -> slice:
        start = self.hidden_dim
        return slice(start, start + self.hidden_dim * self.input_dim)

    @property
    def output_bias(self) -> int:
        return self.hidden_dim + self.hidden_dim * self.input_dim

    @property
    def output_weights(self) -> slice:
        start = self.output_bias + 1
        return slice(start, start + self.hidden_dim)

    @property
    def linear(self) -> slice:
        start = self.output_weights.stop
        return slice(start, start + (self.input_dim if self.hidden_dim == 0 else 0))

    @property
    def n_params(self) -> int:
        return self.linear.stop

    def hidden_bias_index(self, j: int) -> int:
        return j

    def hidden_weight_index(self, j: int, i: int) -> int:
        return self.hidden_dim + j * self.input_dim + i

    def output_weight_index(self, j: int) -> int:
        return self.output_bias + 1 + j

    def linear_index(self, i: int) -> int:
        return self.linear.start + i

    def is_bias(self, k: int) -> bool:
        return k < self.hidden_dim or k == self.output_bias

    def input_indices(self, i: int) -> list[int]:
        """Every weight reading input column i."""
        if self.hidden_dim == 0:
            return [self.linear_index(i)]
        return [self.hidden_weight_index(j, i) for j in range(self.hidden_dim)]

    def describe(self, k: int) -> tuple[str, Optional[int], Optional[int]]:
        """(kind, hidden unit, input column) of flat index k."""
        if k < self.hidden_dim:
            return "hidden_bias", k, None
        if k < self.output_bias:
            j, i = divmod(k - self.hidden_dim, self.input_dim)
            return "hidden_weight", j, i
        if k == self.output_bias:
            return "output_bias", None, None
        if k < self.output_weights.stop:
            return "output_weight", k - self.output_bias - 1, None
        return "linear_weight", None, k - self.linear.start

    def name(self, k: int, columns: Optional[Sequence[str]] = None) -> str:
        kind, j, i = self.describe(k)
        col = (columns[i] if columns is not None and i is not None else f"x{i}")
        if kind == "hidden_bias":
            return f"b[h{j}]"
        if kind == "hidden_weight":
            return f"w[h{j},{col}]"
        if kind == "output_bias":
            return "w0"
        if kind == "output_weight":
            return f"v[h{j}]"
        return f"w[{col}]"


@dataclass(frozen=True)
class Network:
    input_dim: int
    hidden_dim: int
    weights: np.ndarray
    mask: np.ndarray
    output_kind: str = OUTPUT_IDENTITY

    def __post_init__(self) -> None:
        if self.output_kind not in (OUTPUT_IDENTITY, OUTPUT_SIGMOID):
            raise ConfigError(f"unknown output kind {self.output_kind!r}")
        if self.weights.shape != (self.layout.n_params,) or self.mask.shape != self.weights.shape:
            raise DimensionMismatch(
                f"expected {self.layout.n_params} weights for p={self.input_dim}, n={self.hidden_dim}"
            )

    @classmethod
    def zeros(cls, input_dim: int, hidden_dim: int, output_kind: str = OUTPUT_IDENTITY) -> "Network":
        n = Layout(input_dim, hidden_dim).n_params
        return cls(input_dim, hidden_dim, np.zeros(n), np.ones(n, dtype=bool), output_kind)

    @property
    def layout(self) -> Layout:
        return Layout(self.input_dim, self.hidden_dim)

    @property
    def hidden_bias(self) -> np.ndarray:
        return self.weights[self.layout.hidden_bias]

    @property
    def hidden_weights(self) -> np.ndarray:
        return self.weights[self.layout.hidden_weights].reshape(self.hidden_dim, self.input_dim)

    @property
    def output_bias(self) -> float:
        return float(self.weights[self.layout.output_bias])

    @property
    def output_weights(self) -> np.ndarray:
        return self.weights[self.layout.output_weights]

    @property
    def linear_weights(self) -> np.ndarray:
        return self.weights[self.layout.linear]

    @property
    def active_indices(self) -> np.ndarray:
        return np.flatnonzero(self.mask)

    @property
    def active_count(self) -> int:
        return int(self.mask.sum())

    def with_weights(self, weights: np.ndarray) -> "Network":
        w = np.where(self.mask, np.asarray(weights, dtype=float), 0.0)
        return replace(self, weights=w)

    def with_mask(self, mask: np.ndarray) -> "Network":
        mask = np.asarray(mask, dtype=bool).copy()
        return replace(self, mask=mask, weights=np.where(mask, self.weights, 0.0))

    def live_units(self) -> list[int]:
        lay = self.layout
        return [j for j in range(self.hidden_dim) if self.mask[lay.output_weight_index(j)]]

    def live_inputs(self) -> list[int]:
        lay = self.layout
        return [i for i in range(self.input_dim) if any(self.mask[k] for k in lay.input_indices(i))]

    def to_dict(self) -> dict:
        return {
            "input_dim": self.input_dim,
            "hidden_dim": self.hidden_dim,
            "output_kind": self.output_kind,
            "weights": [float(v) for v in self.weights],
            "mask": [bool(v) for v in self.mask],
        }

    @classmethod
    def from_dict(cls, raw: dict) -> "Network":
        return cls(
            input_dim=int(raw["input_dim"]),
            hidden_dim=int(raw["hidden_dim"]),
            weights=np.asarray(raw["weights"], dtype=float),
            mask=np.asarray(raw["mask"], dtype=bool),
            output_kind=raw.get("output_kind", OUTPUT_IDENTITY),
        )


@dataclass(frozen=True)
class TrainConfig:
    max_iterations: int = 500
    damping: float = 1e-2
    damping_increase: float = 10.0
    damping_decrease: float = 10.0
    tolerance: float = 1e-9
    restarts: int = 4
    seed: int = 0
    max_damping: float = 1e12
    loss: str = LOSS_SQUARED

    def __post_init__(self) -> None:
        if self.max_iterations < 1 or self.restarts < 1:
            raise ConfigError("max_iterations and restarts must be >= 1")
        if not (self.damping > 0 and self.damping_increase > 1 and self.damping_decrease > 1):
            raise ConfigError("LM damping and its factors must be positive (factors > 1)")
        if not self.tolerance > 0:
            raise ConfigError("tolerance must be > 0")
        if self.loss not in (LOSS_SQUARED, LOSS_CROSS_ENTROPY):
            raise ConfigError(f"unknown loss {self.loss!r}")


@dataclass
class TrainResult:
    network: Network
    cost_trace: list[float]
    iterations: int
    converged: bool

    @property
    def cost(self) -> float:
        return self.cost_trace[-1]


@dataclass
class MultistartResult:
    network: Network
    cost: float
    restart: int
    cost_trace: list[float]
    restart_costs: list[Optional[float]] = field(default_factory=list)


# ---------------------------------------------------------------------------
# ПРЯМОЙ ПРОХОД И ЯКОБИАН
# ---------------------------------------------------------------------------

def _as_matrix(net: Network, X: np.ndarray) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X.reshape(1, -1)
    if X.shape[1] != net.input_dim:
        raise DimensionMismatch(f"network expects {net.input_dim} inputs, got {X.shape[1]}")
    return X


def _hidden(net: Network, X: np.ndarray) -> np.ndarray:
    return np.tanh(X @ net.hidden_weights.T + net.hidden_bias)


def affine_output(net: Network, X: np.ndarray) -> np.ndarray:
    """Output before the output activation, one value per row."""
    X = _as_matrix(net, X)
    out = net.output_bias + _hidden(net, X) @ net.output_weights
    if net.hidden_dim == 0:
        out = out + X @ net.linear_weights
    return out


def predict(net: Network, X: np.ndarray) -> np.ndarray:
    u = affine_output(net, X)
    if net.output_kind == OUTPUT_SIGMOID:
        return expit(u)
    return u


def forward(net: Network, x: Sequence[float]) -> float:
    if net.output_kind != OUTPUT_IDENTITY:
        raise WrongOutputKind("forward() evaluates regression networks; use classifier.forward_classifier")
    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or x.size != net.input_dim:
        raise DimensionMismatch(f"network expects {net.input_dim} inputs, got {x.size}")
    return float(affine_output(net, x)[0])


def full_jacobian(net: Network, X: np.ndarray) -> np.ndarray:
    """d output / d weight for every flat weight, masked or not: (rows, n_params)."""
    X = _as_matrix(net, X)
    lay = net.layout
    N = X.shape[0]
    J = np.zeros((N, lay.n_params))

    T = _hidden(net, X)
    G = net.output_weights * (1.0 - T**2)
    J[:, lay.hidden_bias] = G
    J[:, lay.hidden_weights] = (G[:, :, None] * X[:, None, :]).reshape(N, -1)
    J[:, lay.output_bias] = 1.0
    J[:, lay.output_weights] = T
    if net.hidden_dim == 0:
        J[:, lay.linear] = X

    if net.output_kind == OUTPUT_SIGMOID:
        s = expit(net.output_bias + T @ net.output_weights + (X @ net.linear_weights if net.hidden_dim == 0 else 0.0))
        J *= (s * (1.0 - s))[:, None]
    return J


def jacobian_matrix(net: Network, X: np.ndarray) -> np.ndarray:
    """Stacked gradients over rows, restricted to unmasked weights (columns in flat order)."""
    return full_jacobian(net, X)[:, net.mask]


def jacobian(net: Network, x: Sequence[float]) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or x.size != net.input_dim:
        raise DimensionMismatch(f"network expects {net.input_dim} inputs, got {x.size}")
    return jacobian_matrix(net, x)[0]


def sum_squared_cost(net: Network, X: np.ndarray, y: np.ndarray) -> float:
    r = np.asarray(y, dtype=float) - predict(net, X)
    return 0.5 * float(r @ r)


def mse(net: Network, X: np.ndarray, y: np.ndarray) -> float:
    r = np.asarray(y, dtype=float) - predict(net, X)
    return float(r @ r) / max(1, r.size)


# ---------------------------------------------------------------------------
# ИНИЦИАЛИЗАЦИЯ
# ---------------------------------------------------------------------------

def _targets(train: FeatureTable) -> np.ndarray:
    if train.target is None:
        raise DimensionMismatch("training table has no target column")
    return np.asarray(train.target, dtype=float)


def _output_bias_start(y: np.ndarray, output_kind: str) -> float:
    if output_kind == OUTPUT_SIGMOID:
        return float(logit(np.clip(y.mean(), 1e-3, 1 - 1e-3)))
    return float(y.mean())


def init_from_linear(
    train: FeatureTable,
    hidden_dim: int,
    seed: int = 0,
    output_kind: str = OUTPUT_IDENTITY,
    mask: Optional[np.ndarray] = None,
) -> Network:
    """
    Start from the ordinary least squares fit on the same inputs: every hidden unit
    gets the OLS direction (scaled into the quasi-linear part of tanh, plus noise of
    std 0.01 so the units differ) and the output bias starts at the target mean.
    """
    X, y = train.values, _targets(train)
    N, p = X.shape
    design = np.column_stack([np.ones(N), X])
    if N < p + 1 or np.linalg.matrix_rank(design) < p + 1:
        raise SingularDesign(f"train design of {N} rows x {p} columns is rank deficient")

    coef, *_ = np.linalg.lstsq(design, y, rcond=None)
    intercept, slope = float(coef[0]), coef[1:]

    net = Network.zeros(p, hidden_dim, output_kind)
    lay = net.layout
    w = net.weights.copy()
    gain = 4.0 if output_kind == OUTPUT_SIGMOID else 1.0

    if hidden_dim == 0:
        w[lay.linear] = gain * slope
        w[lay.output_bias] = intercept if output_kind == OUTPUT_IDENTITY else _output_bias_start(y, output_kind)
    else:
        rng = np.random.default_rng([seed, 0])
        centered = (X - X.mean(axis=0)) @ slope
        scale = 2.0 * float(np.abs(centered).max())
        if scale == 0.0:
            scale = 1.0
        center = float(X.mean(axis=0) @ slope) / scale
        # знак шума берётся от главного коэффициента МНК: у инвертированных целей зеркальный старт
        orientation = 1.0 if slope[int(np.argmax(np.abs(slope)))] >= 0 else -1.0
        noise = orientation * rng.normal(0.0, INIT_NOISE_STD, (hidden_dim, p))
        W = np.tile(slope / scale, (hidden_dim, 1)) + noise
        w[lay.hidden_weights] = W.ravel()
        w[lay.hidden_bias] = -center
        w[lay.output_weights] = gain * scale / hidden_dim
        w[lay.output_bias] = _output_bias_start(y, output_kind)

    net = net.with_weights(w)
    if mask is not None:
        net = net.with_mask(mask)
    return net


def random_init(
    train: FeatureTable,
    hidden_dim: int,
    rng: np.random.Generator,
    output_kind: str = OUTPUT_IDENTITY,
    mask: Optional[np.ndarray] = None,
) -> Network:
    y = _targets(train)
    net = Network.zeros(train.n_columns, hidden_dim, output_kind)
    w = rng.uniform(-RANDOM_INIT_RANGE, RANDOM_INIT_RANGE, net.layout.n_params)
    w[net.layout.output_bias] = _output_bias_start(y, output_kind)
    net = net.with_weights(w)
    if mask is not None:
        net = net.with_mask(mask)
    return net


# ---------------------------------------------------------------------------
# ЛЕВЕНБЕРГ-МАРКВАРДТ
# ---------------------------------------------------------------------------

def _cost(net: Network, X: np.ndarray, y: np.ndarray, loss: str) -> float:
    if loss == LOSS_CROSS_ENTROPY:
        u = affine_output(net, X)
        # -sum[y log s + (1-y) log(1-s)] через logaddexp для больших |u|
        return float(np.sum(np.logaddexp(0.0, u) - y * u))
    return sum_squared_cost(net, X, y)


def _linearize(net: Network, X: np.ndarray, y: np.ndarray, loss: str) -> tuple[np.ndarray, np.ndarray]:
    """(J, r) such that the Gauss-Newton step solves (J'J + lambda I) d = J'r."""
    if loss == LOSS_CROSS_ENTROPY:
        s = predict(net, X)
        weight = np.clip(s * (1.0 - s), 1e-12, None)
        root = np.sqrt(weight)
        Ju = full_jacobian(replace(net, output_kind=OUTPUT_IDENTITY), X)[:, net.mask]
        return Ju * root[:, None], (y - s) / root
    return jacobian_matrix(net, X), y - predict(net, X)


def train_lm(
    net: Network,
    train: FeatureTable,
    cfg: TrainConfig,
    max_iterations: Optional[int] = None,
) -> TrainResult:
    X, y = train.values, _targets(train)
    if X.shape[0] == 0:
        raise DimensionMismatch("empty training table")
    _as_matrix(net, X)
    loss = cfg.loss if net.output_kind == OUTPUT_SIGMOID else LOSS_SQUARED
    limit = cfg.max_iterations if max_iterations is None else max_iterations

    active = net.active_indices
    w = net.weights.copy()
    current = _cost(net, X, y, loss)
    if not np.isfinite(current):
        raise NonFiniteCost("initial training cost is not finite")

    trace = [current]
    damping = cfg.damping
    iterations = 0
    converged = current == 0.0 or active.size == 0

    while not converged and iterations < limit:
        J, r = _linearize(net.with_weights(w), X, y, loss)
        A = J.T @ J
        g = J.T @ r
        accepted = False

        while iterations < limit:
            iterations += 1
            try:
                step = np.linalg.solve(A + damping * np.eye(A.shape[0]), g)
            except np.linalg.LinAlgError:
                damping *= cfg.damping_increase
                continue
            candidate = w.copy()
            candidate[active] += step
            cost = _cost(net.with_weights(candidate), X, y, loss) if np.all(np.isfinite(candidate)) else np.inf

            if np.isfinite(cost) and cost < current:
                decrease = (current - cost) / current
                w, current = candidate, cost
                trace.append(current)
                damping = max(damping / cfg.damping_decrease, 1e-15)
                accepted = True
                if current == 0.0 or decrease < cfg.tolerance:
                    converged = True
                break

            damping *= cfg.damping_increase
            if damping > cfg.max_damping:
                break

        if not accepted:
            # спуска нет ни при каком демпфировании: локальный минимум с рабочей точностью
            converged = damping > cfg.max_damping
            break

    return TrainResult(
        network=net.with_weights(w),
        cost_trace=trace,
        iterations=iterations,
        converged=converged,
    )


def multistart(
    train: FeatureTable,
    hidden_dim: int,
    cfg: TrainConfig,
    output_kind: str = OUTPUT_IDENTITY,
    mask: Optional[np.ndarray] = None,
    n_jobs: Optional[int] = None,
) -> MultistartResult:
    """
    Restart 0 starts from the linear regression, restarts 1..k-1 from uniform random
    weights. Each restart draws from its own (seed, index) stream, so the selection
    does not depend on how restarts are scheduled.
    """

    def run(k: int) -> Optional[TrainResult]:
        if k == 0:
            start = init_from_linear(train, hidden_dim, seed=cfg.seed, output_kind=output_kind, mask=mask)
        else:
            rng = np.random.default_rng([cfg.seed, k])
            start = random_init(train, hidden_dim, rng, output_kind=output_kind, mask=mask)
        try:
            return train_lm(start, train, cfg)
        except NonFiniteCost as exc:
            logger.warning("Restart %d discarded: %s", k, exc)
            return None

    results = parallel_map(run, range(cfg.restarts), n_jobs=n_jobs)
    ranked = [(res.cost, k, res) for k, res in enumerate(results) if res is not None]
    if not ranked:
        raise NonFiniteCost(f"all {cfg.restarts} restarts diverged")

    cost, k, best = min(ranked, key=lambda item: (item[0], item[1]))
    logger.debug("multistart n=%d: best restart %d cost=%.6g", hidden_dim, k, cost)
    return MultistartResult(
        network=best.network,
        cost=cost,
        restart=k,
        cost_trace=best.cost_trace,
        restart_costs=[None if res is None else res.cost for res in results],
    )
