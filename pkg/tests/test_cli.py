import json
import math
from dataclasses import replace
from datetime import date, timedelta

import numpy as np
import pandas as pd
import pytest

from ozonecast.cli import main, run_evaluate, run_train
from ozonecast.common.config import load_config
from ozonecast.metrics import REPORT_COLUMNS
from ozonecast.storage import load_bundle
from ozonecast.synth import SynthSpec, write_season

SPEC = SynthSpec(n_train=150, n_validation=40, train_exceedances=6, validation_exceedances=3)
OVERRIDES = {"restarts": 2, "hidden_range": [0, 1]}


def _season(directory):
    return write_season(directory, SPEC, OVERRIDES)


def _pipeline(paths):
    config = str(paths["config"])
    return [
        main(["train", "--config", config]),
        main(["evaluate", "--config", config]),
        main(["forecast", "--config", config, str(paths["forecast"])]),
    ]


@pytest.fixture(scope="module")
def trained(tmp_path_factory):
    base = tmp_path_factory.mktemp("season")
    with pytest.MonkeyPatch.context() as mp:
        mp.setenv("OZONECAST_LOG_DIR", str(base / "logs"))
        mp.setenv("OZONECAST_THREADS", "1")
        mp.delenv("METRICS_PORT", raising=False)
        paths = _season(base)
        codes = _pipeline(paths)
        codes.append(main(["plotdata", "--config", str(paths["config"])]))
    return base, paths, codes


def test_pipeline_exit_codes(trained):
    _, _, codes = trained
    assert codes == [0, 0, 0, 0]


def test_train_artifacts(trained):
    base, _, _ = trained
    bundle = load_bundle(base / "models" / "ozonecast.json")
    assert bundle.regression.network.hidden_dim in (0, 1)
    assert bundle.train_rows == 150
    curve = pd.read_csv(base / "out" / "bic_curve.csv")
    assert curve["hidden_units"].tolist() == [0, 1]
    assert (base / "out" / "prune_trace.csv").exists()
    assert (base / "out" / "train_load_report.txt").exists()


def test_report_rows(trained):
    base, _, _ = trained
    report = pd.read_csv(base / "out" / "report.csv", keep_default_na=False)
    assert list(report.columns) == ["model", *REPORT_COLUMNS]
    assert {"MLP", "PERS"} <= set(report["model"])
    mlp = report[report["model"] == "MLP"].iloc[0]
    assert 0.0 <= float(mlp["d"]) <= 1.0


def test_forecast_output(trained):
    base, _, _ = trained
    forecast = pd.read_csv(base / "out" / "forecast.csv")
    assert len(forecast) == SPEC.forecast_days
    assert list(forecast.columns) == ["date", "point", "lower", "upper", "interval_alarm", "probability", "probability_alarm"]
    probs = forecast["probability"].dropna()
    assert ((probs >= 0.0) & (probs <= 1.0)).all()
    assert set(forecast["interval_alarm"]) <= {0, 1}


def test_plot_series(trained):
    base, _, _ = trained
    scatter = pd.read_csv(base / "out" / "plot_scatter.csv")
    assert len(scatter) == SPEC.n_validation
    residuals = pd.read_csv(base / "out" / "plot_residuals.csv")
    flagged = residuals[residuals["outside_band"] == 1]
    assert (flagged["standardized_residual"].abs() > 2.0).all()
    assert len(pd.read_csv(base / "out" / "plot_bic_curve.csv")) == 2


def test_same_seed_gives_identical_outputs(trained, tmp_path):
    base, _, _ = trained
    paths = _season(tmp_path)
    assert _pipeline(paths) == [0, 0, 0]
    for name in ("models/ozonecast.json", "out/report.csv", "out/evaluation.csv", "out/forecast.csv", "out/bic_curve.csv"):
        assert (tmp_path / name).read_bytes() == (base / name).read_bytes(), name


def test_reversed_hidden_range_is_rejected(trained):
    _, paths, _ = trained
    assert main(["train", "--config", str(paths["config"]), "--hidden-range", "3-1"]) == 2


def test_missing_model(tmp_path):
    paths = _season(tmp_path)
    assert main(["evaluate", "--config", str(paths["config"])]) == 2


def test_plotdata_before_evaluate(trained, tmp_path):
    base, paths, _ = trained
    assert main(["plotdata", "--config", str(paths["config"]), "--out", str(tmp_path / "empty")]) == 2


def test_forecast_with_missing_predictor(trained, tmp_path, capsys):
    _, paths, _ = trained
    frame = pd.read_csv(paths["forecast"], dtype=str, keep_default_na=False)
    frame.loc[0, "t_max"] = ""
    broken = tmp_path / "broken.csv"
    frame.to_csv(broken, index=False)
    assert main(["forecast", "--config", str(paths["config"]), "--out", str(tmp_path / "out"), str(broken)]) == 2
    assert "t_max" in capsys.readouterr().err


def test_retrain_appends_season(tmp_path):
    paths = _season(tmp_path)
    config = str(paths["config"])
    assert main(["train", "--config", config]) == 0
    assert main(["retrain", "--config", config, str(paths["validation"])]) == 0

    archive = pd.read_csv(tmp_path / "archive.csv")
    assert len(archive) == SPEC.n_train + SPEC.n_validation
    versions = list((tmp_path / "models").glob("ozonecast-*.json"))
    assert len(versions) == 1
    assert load_bundle(versions[0]).train_rows == SPEC.n_train + SPEC.n_validation

    assert main(["retrain", "--config", config, str(paths["validation"])]) == 2
    assert len(pd.read_csv(tmp_path / "archive.csv")) == SPEC.n_train + SPEC.n_validation


def test_failed_retrain_leaves_archive_untouched(tmp_path):
    paths = _season(tmp_path)
    assert main(["train", "--config", str(paths["config"])]) == 0
    archive = tmp_path / "archive.csv"
    archive.write_bytes(paths["train"].read_bytes())

    raw = json.loads(paths["config"].read_text(encoding="utf-8"))
    raw["validation_csv"] = "missing.csv"
    broken = tmp_path / "broken.json"
    broken.write_text(json.dumps(raw), encoding="utf-8")

    assert main(["retrain", "--config", str(broken), str(paths["validation"])]) == 2
    assert archive.read_bytes() == paths["train"].read_bytes()
    assert list(tmp_path.glob("archive.csv.*")) == []

    assert main(["retrain", "--config", str(paths["config"]), str(paths["validation"])]) == 0
    assert len(pd.read_csv(archive)) == SPEC.n_train + SPEC.n_validation


def test_retrain_is_reproducible(tmp_path):
    versions = []
    for name in ("first", "second"):
        paths = _season(tmp_path / name)
        config = str(paths["config"])
        assert main(["train", "--config", config]) == 0
        assert main(["retrain", "--config", config, str(paths["validation"])]) == 0
        versions.append(sorted((tmp_path / name / "models").glob("ozonecast-*.json")))
    first, second = versions
    assert [p.name for p in first] == [p.name for p in second]
    assert first[0].read_bytes() == second[0].read_bytes()


def test_reuse_architecture_from_other_station(trained, tmp_path):
    base, _, _ = trained
    reference = load_bundle(base / "models" / "ozonecast.json").regression
    paths = write_season(tmp_path, replace(SPEC, seed=1), OVERRIDES)
    model = base / "models" / "ozonecast.json"

    assert main(["train", "--config", str(paths["config"]), "--reuse-architecture", str(model)]) == 0
    entry = load_bundle(tmp_path / "models" / "ozonecast.json").regression
    assert entry.network.hidden_dim == reference.network.hidden_dim
    assert list(entry.columns) == [c for c in reference.columns if c not in reference.eliminated_inputs]
    assert len(entry.curve) == 1
    assert entry.bic_on == "train"


def test_balanced_training(tmp_path):
    paths = _season(tmp_path)
    assert main(["train", "--config", str(paths["config"]), "--balance", "1,0.0125,180,1"]) == 0

    manifest = pd.read_csv(tmp_path / "out" / "balanced_manifest.csv")
    kept_below = round(math.exp(0.0125 * 180.0) * SPEC.train_exceedances)
    assert len(manifest) == SPEC.train_exceedances + kept_below
    assert int((manifest["peak"] >= 180.0).sum()) == SPEC.train_exceedances
    assert manifest["row"].is_unique
    assert load_bundle(tmp_path / "models" / "ozonecast.json").train_rows == len(manifest)


def _linear_frame(rng, n, start, noise):
    x1 = rng.normal(size=n).round(4)
    x2 = rng.normal(size=n).round(4)
    return pd.DataFrame(
        {
            "date": [(start + timedelta(days=i)).isoformat() for i in range(n)],
            "peak": 150.0 + 20.0 * x1 - 10.0 * x2 + rng.normal(0.0, noise, n),
            "ozone_noon": rng.uniform(60.0, 140.0, n).round(3),
            "x1": x1,
            "x2": x2,
        }
    )


def _linear_config(tmp_path, **extra):
    config = {
        "train_csv": "train.csv",
        "schema": {"numeric": ["x1", "x2"], "categorical": {}},
        "restarts": 2,
        "baselines": ["pers"],
        **extra,
    }
    path = tmp_path / "config.json"
    path.write_text(json.dumps(config), encoding="utf-8")
    return str(path)


def test_linear_data_selects_no_hidden_units(tmp_path):
    _linear_frame(np.random.default_rng(0), 100, date(2003, 4, 1), 1.0).to_csv(tmp_path / "train.csv", index=False)
    config = _linear_config(tmp_path, hidden_range=[0, 1])

    assert main(["train", "--config", config]) == 0
    bundle = load_bundle(tmp_path / "models" / "ozonecast.json")
    assert bundle.regression.network.hidden_dim == 0
    assert bundle.regression.bic_on == "train"
    assert bundle.ridge is None and bundle.logistic is None


def test_perfect_forecasts_give_unit_agreement(tmp_path):
    rng = np.random.default_rng(1)
    _linear_frame(rng, 100, date(2003, 4, 1), 0.0).to_csv(tmp_path / "train.csv", index=False)
    _linear_frame(rng, 40, date(2003, 7, 10), 0.0).to_csv(tmp_path / "validation.csv", index=False)
    config = _linear_config(tmp_path, hidden_range=[0], validation_csv="validation.csv")

    assert main(["train", "--config", config]) == 0
    assert main(["evaluate", "--config", config]) == 0
    report = json.loads((tmp_path / "out" / "report.json").read_text(encoding="utf-8"))
    net = next(row for row in report if row["model"] == "MLP")
    assert net["fit"]["d"] == pytest.approx(1.0, abs=1e-9)
    assert net["fit"]["rmse"] == pytest.approx(0.0, abs=1e-6)


# ---------------------------------------------------------------------------
# Full synthetic seasons
# ---------------------------------------------------------------------------

SEEDS = range(10)


@pytest.fixture(scope="module")
def seasons(tmp_path_factory):
    rows = {}
    with pytest.MonkeyPatch.context() as mp:
        mp.setenv("OZONECAST_LOG_DIR", str(tmp_path_factory.getbasetemp() / "logs"))
        mp.setenv("OZONECAST_THREADS", "1")
        mp.delenv("METRICS_PORT", raising=False)
        for seed in SEEDS:
            base = tmp_path_factory.mktemp(f"seed{seed}")
            paths = write_season(base, SynthSpec(seed=seed))
            cfg = load_config(paths["config"])
            run_train(cfg)
            rows[seed] = {row.model: row.values() for row in run_evaluate(cfg)}
    return rows


@pytest.mark.slow
def test_network_beats_persistence_on_agreement(seasons):
    for seed, rows in seasons.items():
        assert rows["MLP"]["d"] > rows["PERS"]["d"], seed


@pytest.mark.slow
def test_classifier_improves_exceedance_skill(seasons):
    classifier = np.median([rows["CLASSIFIER"]["SI"] for rows in seasons.values()])
    interval_rule = np.median([rows["MLP"]["SI"] for rows in seasons.values()])
    assert classifier > interval_rule
