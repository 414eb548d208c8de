import json

import pandas as pd
import pytest

from ozonecast.dataset import load_csv
from ozonecast.errors import ConfigError
from ozonecast.synth import SynthSpec, generate, synth_schema, write_season


def test_exact_exceedance_counts():
    train, validation = generate(SynthSpec())
    assert len(train) == 600
    assert len(validation) == 105
    assert int((train["peak"] >= 180.0).sum()) == 12
    assert int((validation["peak"] >= 180.0).sum()) == 7


def test_generation_is_seeded():
    first, _ = generate(SynthSpec(n_train=50, n_validation=20, train_exceedances=3, validation_exceedances=1, seed=5))
    again, _ = generate(SynthSpec(n_train=50, n_validation=20, train_exceedances=3, validation_exceedances=1, seed=5))
    other, _ = generate(SynthSpec(n_train=50, n_validation=20, train_exceedances=3, validation_exceedances=1, seed=6))
    pd.testing.assert_frame_equal(first, again)
    assert not first.equals(other)


def test_validation_follows_train_in_season():
    train, validation = generate(SynthSpec(n_train=200, n_validation=40, train_exceedances=4, validation_exceedances=2))
    dates = pd.to_datetime(pd.concat([train["date"], validation["date"]]))
    assert dates.is_monotonic_increasing
    assert set(dates.dt.month) <= {4, 5, 6, 7, 8, 9}


def test_invalid_spec():
    with pytest.raises(ConfigError):
        SynthSpec(n_train=20, train_exceedances=20)


def test_write_season_files(tmp_path):
    spec = SynthSpec(n_train=60, n_validation=20, train_exceedances=3, validation_exceedances=2, forecast_days=5)
    paths = write_season(tmp_path, spec, {"restarts": 2})

    assert set(paths) == {"train", "validation", "forecast", "config"}
    assert all(p.exists() for p in paths.values())

    forecast = pd.read_csv(paths["forecast"])
    assert "peak" not in forecast.columns
    assert len(forecast) == 5

    config = json.loads(paths["config"].read_text(encoding="utf-8"))
    assert config["restarts"] == 2
    assert config["train_csv"] == "train.csv"

    loaded = load_csv(paths["train"], synth_schema())
    assert len(loaded.records) == 60
    assert loaded.report.skipped == []
    assert load_csv(paths["forecast"], synth_schema(), require_target=False).records[0].target_peak is None
