import logging
from datetime import date

import numpy as np
import pytest

from ozonecast.classifier import (
    TARGET_INTERVAL,
    decide,
    forecast_probabilities,
    forward_classifier,
    make_targets,
    train_classifier,
)
from ozonecast.dataset import RawRecord
from ozonecast.errors import MissingRegressionContext, OutOfDomain, SingleClass, WrongOutputKind
from ozonecast.mlp import LOSS_CROSS_ENTROPY, OUTPUT_SIGMOID, Network, TrainConfig, predict
from ozonecast.uncertainty import PredictionInterval


def _records(peaks):
    return [
        RawRecord(date=date(2003, 7, 1 + i), target_peak=p, ozone_noon=90.0, numeric_predictors={}, categorical_predictors={})
        for i, p in enumerate(peaks)
    ]


def _sigmoid_net(hidden_dim, weights):
    weights = np.asarray(weights, dtype=float)
    return Network(1, hidden_dim, weights, np.ones(weights.size, dtype=bool), OUTPUT_SIGMOID)


def test_observed_targets():
    targets = make_targets(_records([150.0, 190.0]), 180.0)
    assert targets.values.tolist() == [0, 1]
    assert not targets.single_class


def test_single_class_targets_warn(caplog, monkeypatch):
    monkeypatch.setattr(logging.getLogger("ozonecast"), "propagate", True)
    with caplog.at_level(logging.WARNING, logger="ozonecast.classifier"):
        targets = make_targets(_records([100.0, 120.0, 170.0]), 180.0)
    assert targets.values.tolist() == [0, 0, 0]
    assert targets.single_class
    assert "single class" in caplog.text


def test_interval_targets_from_given_intervals():
    targets = make_targets(
        _records([160.0]), 180.0, mode=TARGET_INTERVAL, intervals=[PredictionInterval(175.0, 10.0, 0.05, 20)]
    )
    assert targets.values.tolist() == [1]


def test_interval_targets_need_regression_context():
    with pytest.raises(MissingRegressionContext):
        make_targets(_records([160.0]), 180.0, mode=TARGET_INTERVAL)


def test_forward_classifier_zero_network():
    assert forward_classifier(Network.zeros(2, 1, OUTPUT_SIGMOID), [0.3, 0.9]) == 0.5


def test_forward_classifier_saturates():
    net = Network.zeros(2, 1, OUTPUT_SIGMOID)
    w = net.weights.copy()
    w[net.layout.output_bias] = 20.0
    p = forward_classifier(net.with_weights(w), [1.0, 1.0])
    assert 1.0 - 1e-8 < p < 1.0


def test_forward_classifier_hand_evaluation():
    # b, W, w0, v
    net = _sigmoid_net(1, [0.0, 1.0, 0.0, 2.0])
    assert forward_classifier(net, [1.0]) == pytest.approx(0.8211, abs=1e-4)


def test_forward_classifier_rejects_regression_network():
    with pytest.raises(WrongOutputKind):
        forward_classifier(Network.zeros(1, 1), [0.0])


@pytest.mark.parametrize("probability, expected", [(0.5, True), (0.49, False), (1.0, True), (0.0, False)])
def test_decide(probability, expected):
    assert decide(probability) is expected


def test_decide_out_of_domain():
    with pytest.raises(OutOfDomain):
        decide(1.2)


def test_separable_data_is_classified_exactly(make_table):
    x = np.linspace(0.0, 1.0, 40)
    labels = (x > 0.5).astype(int)
    table = make_table(x, labels)
    result = train_classifier(table, labels, TrainConfig(restarts=2), hidden_dim=1)
    decisions = [f.decision for f in forecast_probabilities(result.network, table.values)]
    assert decisions == [bool(v) for v in labels]


def test_label_flip_gives_complementary_probabilities(make_table):
    rng = np.random.default_rng(7)
    X = rng.uniform(0.0, 1.0, size=(80, 2))
    p = 1.0 / (1.0 + np.exp(-(4.0 * X[:, 0] - 2.0 * X[:, 1] - 1.0)))
    labels = (rng.uniform(size=80) < p).astype(int)
    table = make_table(X, labels)
    cfg = TrainConfig(restarts=1, seed=3)

    original = train_classifier(table, labels, cfg, hidden_dim=1)
    flipped = train_classifier(table, 1 - labels, cfg, hidden_dim=1)
    np.testing.assert_allclose(
        predict(flipped.network, X), 1.0 - predict(original.network, X), atol=1e-6
    )


def test_probabilities_stay_in_unit_interval(make_table):
    rng = np.random.default_rng(8)
    X = rng.uniform(size=(50, 2))
    labels = (X[:, 0] + 0.2 * rng.normal(size=50) > 0.5).astype(int)
    result = train_classifier(make_table(X, labels), labels, TrainConfig(restarts=2), hidden_dim=2)
    probs = predict(result.network, rng.uniform(size=(200, 2)))
    assert np.all((probs > 0.0) & (probs < 1.0))


def test_single_class_training_fails(make_table):
    with pytest.raises(SingleClass):
        train_classifier(make_table(np.arange(5.0), np.zeros(5)), np.zeros(5, dtype=int), TrainConfig(), hidden_dim=1)


def test_cross_entropy_training(make_table):
    rng = np.random.default_rng(9)
    X = rng.uniform(size=(120, 2))
    labels = (X[:, 0] + 0.2 * rng.normal(size=120) > 0.5).astype(int)
    result = train_classifier(
        make_table(X, labels), labels, TrainConfig(restarts=2, loss=LOSS_CROSS_ENTROPY), hidden_dim=1
    )

    probs = predict(result.network, X)
    assert np.all((probs > 0.0) & (probs < 1.0))
    log_loss = -np.sum(labels * np.log(probs) + (1 - labels) * np.log(1.0 - probs))
    assert result.cost == pytest.approx(log_loss, rel=1e-6)
    assert np.all(np.diff(result.cost_trace) <= 1e-9)
    assert np.mean((probs >= 0.5) == (labels == 1)) >= 0.75
