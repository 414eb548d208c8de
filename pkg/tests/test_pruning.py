import math

import numpy as np
import pytest

from ozonecast.errors import ConfigError, NonPositiveMse
from ozonecast.mlp import Network, TrainConfig, init_from_linear, multistart, train_lm
from ozonecast.pruning import (
    ITEM_INPUT,
    ITEM_UNIT,
    ITEM_WEIGHT,
    bic,
    collapse_units,
    network_bic,
    prune_step,
    prune_to_minimal,
    select_architecture,
)


def test_bic_of_unit_mse_without_weights():
    assert bic(1.0, 37, 0) == 0.0


def test_bic_direct_evaluation():
    assert bic(4.0, 100, 10) == pytest.approx(math.log(4.0) + 10 * math.log(100) / 100)
    assert bic(4.0, 100, 10) == pytest.approx(1.8468, abs=1e-4)


def test_bic_strictly_increasing():
    assert bic(1.0, 50, 3) < bic(1.0, 50, 4)
    assert bic(1.0, 50, 3) < bic(1.1, 50, 3)


def test_bic_rejects_bad_arguments():
    with pytest.raises(NonPositiveMse):
        bic(0.0, 10, 1)
    with pytest.raises(ConfigError):
        bic(1.0, 0, 1)


def test_network_bic_clamps_exact_fit(make_table):
    net = Network.zeros(1, 0)
    table = make_table([1.0, 2.0], [0.0, 0.0])
    value = network_bic(net, table)
    assert value.mse == 0.0
    assert math.isfinite(value.value)


def test_collapse_unit_without_output_weight():
    net = Network(2, 1, np.array([0.3, 0.5, -0.2, 1.0, 0.0]), np.array([True, True, True, True, False]))
    collapsed, removed = collapse_units(net)
    assert removed == [0]
    assert collapsed.active_count == 1
    assert collapsed.live_inputs() == []


def test_collapse_constant_unit_folds_into_bias():
    # b=0.4, W masked, w0=1.0, v=2.0
    net = Network(2, 1, np.array([0.4, 0.0, 0.0, 1.0, 2.0]), np.array([True, False, False, True, True]))
    collapsed, removed = collapse_units(net)
    assert removed == [0]
    assert collapsed.output_bias == pytest.approx(1.0 + 2.0 * math.tanh(0.4))
    assert collapsed.active_count == 1


def test_prune_step_stops_when_removal_hurts(make_table):
    rng = np.random.default_rng(0)
    x = rng.normal(size=100)
    table = make_table(x, 3.0 * x + rng.normal(0.0, 0.1, 100))
    net = train_lm(init_from_linear(table, 0), table, TrainConfig()).network
    assert prune_step(net, table, TrainConfig()) is None


def test_prune_to_minimal_on_bias_only_net(make_table):
    rng = np.random.default_rng(1)
    net = Network.zeros(2, 0)
    mask = np.zeros(net.weights.size, dtype=bool)
    mask[net.layout.output_bias] = True
    trace = prune_to_minimal(net.with_mask(mask), make_table(rng.normal(size=(20, 2)), rng.normal(size=20)), TrainConfig())
    assert trace.steps == []
    assert trace.network.active_count == 1


def _irrelevant_input_table(make_table, seed=0):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(500, 2))
    y = np.tanh(X[:, 0]) + rng.normal(0.0, 0.01, 500)
    return make_table(X, y)


def test_prune_removes_irrelevant_input(make_table):
    table = _irrelevant_input_table(make_table)
    cfg = TrainConfig(restarts=1)
    start = multistart(table, 1, cfg).network
    trace = prune_to_minimal(start, table, cfg)

    lay = trace.network.layout
    assert not trace.network.mask[lay.hidden_weight_index(0, 1)]
    assert trace.network.mask[lay.hidden_weight_index(0, 0)]
    assert trace.eliminated_inputs == [1]
    assert any(s.kind == ITEM_INPUT and s.item == "x2" for s in trace.steps)


def test_prune_trace_invariants(make_table):
    table = _irrelevant_input_table(make_table, seed=3)
    cfg = TrainConfig(restarts=2)
    start = multistart(table, 2, cfg).network
    trace = prune_to_minimal(start, table, cfg)

    assert trace.steps
    assert all(s.bic_after <= s.bic_before for s in trace.steps)
    assert trace.network.active_count < start.active_count
    assert np.all(trace.network.weights[~trace.network.mask] == 0.0)
    assert {s.kind for s in trace.steps} <= {ITEM_WEIGHT, ITEM_INPUT, ITEM_UNIT}


def test_fast_prune_takes_smallest_weight(make_table):
    table = _irrelevant_input_table(make_table, seed=4)
    cfg = TrainConfig(restarts=1)
    start = multistart(table, 1, cfg).network
    candidate = prune_step(start, table, cfg, fast=True)
    assert candidate is not None
    assert candidate.weight_index == start.layout.hidden_weight_index(0, 1)


def test_select_architecture_single_point_range(make_table):
    table = _irrelevant_input_table(make_table, seed=5)
    result = select_architecture(table, None, [0], TrainConfig(restarts=1), bic_on="train")
    assert result.hidden_dim == 0
    assert len(result.curve) == 1


def test_select_architecture_linear_data(make_table):
    rng = np.random.default_rng(6)
    X = rng.normal(size=(120, 2))
    y = 1.5 * X[:, 0] - 0.5 * X[:, 1] + 2.0
    train = make_table(X[:80], y[:80])
    validation = make_table(X[80:], y[80:])
    result = select_architecture(train, validation, [0, 1], TrainConfig(restarts=2))
    assert result.hidden_dim == 0
    assert [p.hidden_dim for p in result.curve] == [0, 1]


def test_select_architecture_validates_arguments(make_table):
    table = _irrelevant_input_table(make_table)
    with pytest.raises(ConfigError):
        select_architecture(table, None, [], TrainConfig())
    with pytest.raises(ConfigError):
        select_architecture(table, None, [1, 2], TrainConfig(), bic_on="train")
    with pytest.raises(ConfigError):
        select_architecture(table, None, [0], TrainConfig(), bic_on="validation")


# ---------------------------------------------------------------------------
# Monte-Carlo oracles
# ---------------------------------------------------------------------------

@pytest.mark.slow
def test_pure_noise_prunes_to_bias_only(make_table):
    bias_only = 0
    for seed in range(20):
        rng = np.random.default_rng(seed)
        table = make_table(rng.normal(size=(500, 2)), rng.normal(size=500))
        cfg = TrainConfig(restarts=1, seed=seed)
        trace = prune_to_minimal(multistart(table, 0, cfg).network, table, cfg)
        bias_only += trace.network.active_count <= 1
    assert bias_only >= 18


@pytest.mark.slow
def test_support_recovery(make_table):
    recovered = 0
    for seed in range(20):
        rng = np.random.default_rng(100 + seed)
        X = rng.normal(size=(500, 12))
        b = rng.uniform(0.5, 1.0, 8) * rng.choice([-1.0, 1.0], 8)
        y = X[:, :8] @ b + rng.normal(0.0, 0.05, 500)
        table = make_table(X, y)
        cfg = TrainConfig(restarts=1, seed=seed)
        trace = prune_to_minimal(multistart(table, 0, cfg).network, table, cfg)
        recovered += trace.network.live_inputs() == list(range(8))
    assert recovered >= 18


@pytest.mark.slow
def test_selects_one_hidden_unit_on_generated_data(make_table):
    hits = 0
    for seed in range(10):
        rng = np.random.default_rng(200 + seed)
        X = rng.normal(size=(700, 2))
        y = 1.0 * np.tanh(2.0 * X[:, 0] - 1.5 * X[:, 1] + 0.3) + 0.2 + rng.normal(0.0, 0.05, 700)
        train = make_table(X[:500], y[:500])
        validation = make_table(X[500:], y[500:])
        result = select_architecture(train, validation, [0, 1, 2], TrainConfig(restarts=2, seed=seed))
        hits += result.hidden_dim == 1
    assert hits >= 8
