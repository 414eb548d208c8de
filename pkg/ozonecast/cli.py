"""
cli.py: командная строка.

    synth     синтетический сезон (CSV train/validation/forecast + config.json)
    train     нормализация -> [балансировка] -> перебор по BIC с прореживанием
              -> контекст интервалов -> классификатор и эталоны -> файл модели
    evaluate  строка отчёта на каждую модель по validation CSV
    forecast  точка, интервал, вероятность и оба правила тревоги для новых дней
    retrain   дописать сезон в архив, переобучить, сохранить версию модели
    plotdata  CSV-ряды для графиков: ряд, BIC, вероятность, диаграмма рассеяния, остатки

Коды выхода: 0 успех, 1 внутренняя ошибка, 2 ошибка пользователя/конфигурации/данных.
"""

from __future__ import annotations

import argparse
import logging
import shutil
import sys
import time
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
import pandas as pd

from ozonecast.baselines import (
    logistic_probabilities,
    logistic_stepwise,
    persistence_forecast,
    predict_linear,
    ridge_fit,
)
from ozonecast.classifier import (
    DECISION_THRESHOLD,
    TARGET_INTERVAL,
    decide,
    make_targets,
    train_classifier,
)
from ozonecast.common.config import RunConfig, apply_overrides, load_config, load_env
from ozonecast.common.logs import log_event, setup_logging
from ozonecast.common.metrics import record_command_result, record_evaluation, record_training, start_metrics_server
from ozonecast.common.text import format_number
from ozonecast.common.time import format_day, parse_day
from ozonecast.dataset import (
    ROLE_TRAIN,
    ROLE_VALIDATION,
    FeatureTable,
    RawRecord,
    anova_check,
    balance,
    build_feature_table,
    drop_collinear_columns,
    drop_constant_columns,
    drop_reference_classes,
    load_csv,
    normalize_fit,
)
from ozonecast.errors import (
    AllExceedances,
    ArchiveConflict,
    ConfigError,
    DataError,
    DofExhausted,
    MalformedHeader,
    MissingArtifact,
    MissingFeature,
    ModelError,
    NoObservedExceedances,
    OzonecastError,
    RankDeficient,
    SingleClass,
    TooFewRows,
)
from ozonecast.metrics import (
    REPORT_COLUMNS,
    ReportRow,
    contingency,
    exceedance_report,
    flag_residuals,
    global_fit_report,
    standardized_residuals,
)
from ozonecast.mlp import TrainConfig, multistart, predict
from ozonecast.pruning import CurvePoint, PruneTrace, network_bic, select_architecture
from ozonecast.storage import (
    ClassifierEntry,
    ModelBundle,
    RegressionEntry,
    bundle_text,
    load_bundle,
    read_table,
    save_bundle,
    versioned_path,
    write_json,
    write_lines,
    write_table,
)
from ozonecast.synth import SynthSpec, write_season
from ozonecast.uncertainty import exceedance_by_interval, interval_context, leverages, prediction_intervals

logger = logging.getLogger("ozonecast.cli")

MODEL_NET = "MLP"
MODEL_PERS = "PERS"
MODEL_LIN = "LIN"
MODEL_CLASSIFIER = "CLASSIFIER"
MODEL_LOGISTIC = "LOGISTIC"

EVALUATION_FILE = "evaluation.csv"


@dataclass
class TrainOutcome:
    bundle: ModelBundle
    path: Path
    train_rows: int


def _train_config(cfg: RunConfig, loss: str = "squared") -> TrainConfig:
    return TrainConfig(max_iterations=cfg.max_iterations, restarts=cfg.restarts, seed=cfg.seed, loss=loss)


def _require(path: Optional[str], what: str) -> str:
    if not path:
        raise ConfigError(f"{what} is not configured")
    if not Path(path).exists():
        raise MissingArtifact(path, what)
    return path


def _out(cfg: RunConfig, name: str) -> Path:
    return Path(cfg.output_dir) / name


def _flags(values: Sequence[float], threshold: float) -> np.ndarray:
    return np.asarray(values, dtype=float) >= threshold


def _exceedance(predicted: Sequence[bool], observed: Sequence[bool], model: str):
    table = contingency(predicted, observed)
    try:
        return table, exceedance_report(table)
    except (NoObservedExceedances, AllExceedances) as exc:
        logger.warning("%s: exceedance indices undefined: %s", model, exc)
        return table, None


# ---------------------------------------------------------------------------
# ОБУЧЕНИЕ
# ---------------------------------------------------------------------------

def _regression_tables(
    cfg: RunConfig,
    records: list[RawRecord],
    validation: Optional[list[RawRecord]],
    columns: Optional[Sequence[str]] = None,
) -> tuple[FeatureTable, Optional[FeatureTable], list[str]]:
    raw = build_feature_table(records, cfg.schema, ROLE_TRAIN)
    dropped: list[str] = []
    if columns is None:
        raw, dropped = drop_constant_columns(raw)
        raw, references = drop_reference_classes(raw, cfg.schema)
        dropped.extend(references)
        raw, collinear = drop_collinear_columns(raw)
        dropped.extend(collinear)
    else:
        raw = raw.select(columns)
    val_raw = None
    if validation:
        val_raw = build_feature_table(validation, cfg.schema, ROLE_VALIDATION).select(raw.columns)
    return raw, val_raw, dropped


def _logistic_columns(cfg: RunConfig, columns: Sequence[str]) -> list[str]:
    wanted = [cfg.schema.persistence, *cfg.schema.numeric]
    return [c for c in wanted if c in columns]


def run_train(cfg: RunConfig, reuse_architecture: Optional[str] = None) -> TrainOutcome:
    train_path = _require(cfg.train_csv, "train CSV")
    loaded = load_csv(train_path, cfg.schema, season_months=cfg.season_months)
    write_lines(_out(cfg, "train_load_report.txt"), loaded.report.lines())
    records = loaded.records

    validation: Optional[list[RawRecord]] = None
    if cfg.validation_csv:
        val_loaded = load_csv(_require(cfg.validation_csv, "validation CSV"), cfg.schema, season_months=cfg.season_months)
        write_lines(_out(cfg, "validation_load_report.txt"), val_loaded.report.lines())
        validation = val_loaded.records
        try:
            anova = anova_check([r.target_peak for r in records], [r.target_peak for r in validation])
            log_event({"level": "info", "msg": "anova_train_vs_validation", "f": anova.f_statistic, "p": anova.p_value})
        except DataError as exc:
            logger.warning("ANOVA skipped: %s", exc)

    spec = cfg.balance_spec()
    if spec is not None:
        balanced = balance(records, spec, cfg.seed)
        write_table(
            _out(cfg, "balanced_manifest.csv"),
            ["index", "row", "date", "peak"],
            [(i, records[i].row, format_day(records[i].date), records[i].target_peak) for i in balanced.kept_indices],
        )
        records = balanced.records
    if len(records) < 2:
        raise TooFewRows(f"only {len(records)} usable train rows")

    tcfg = _train_config(cfg)
    reused: Optional[ModelBundle] = None
    if reuse_architecture:
        reused = load_bundle(reuse_architecture)
        entry = reused.regression
        surviving = [c for c in entry.columns if c not in entry.eliminated_inputs]
        raw, val_raw, dropped = _regression_tables(cfg, records, validation, surviving)
    else:
        raw, val_raw, dropped = _regression_tables(cfg, records, validation)

    train, stats = normalize_fit(raw)
    val = stats.apply(val_raw).with_role(ROLE_VALIDATION) if val_raw is not None else None

    if reused is not None:
        hidden_dim = reused.regression.network.hidden_dim
        start = multistart(train, hidden_dim, tcfg)
        net = start.network
        bic_on = "train"
        score = network_bic(net, train)
        curve = [CurvePoint(hidden_dim, score.value, score.value, net.active_count, start.cost)]
        trace = PruneTrace(network=net)
        chosen = curve[0]
        logger.info("Architecture reused from %s: %d hidden units, %d inputs", reuse_architecture, hidden_dim, train.n_columns)
    else:
        bic_on = cfg.bic_on if val is not None else "train"
        if bic_on != cfg.bic_on:
            logger.warning("No validation CSV: BIC sweep scored on the train rows")
        selection = select_architecture(
            train, val, cfg.hidden_range, tcfg,
            retrain_iterations=cfg.prune_iterations, fast=cfg.fast_prune, bic_on=bic_on,
        )
        net, curve, trace = selection.network, selection.curve, selection.trace
        chosen = selection.point

    cost = 0.5 * float(np.sum((train.target - predict(net, train.values)) ** 2))

    context = None
    lev = None
    try:
        lev = leverages(net, train)
        context = interval_context(net, train, noise=cfg.noise_interval, lev=lev)
    except (RankDeficient, DofExhausted) as exc:
        logger.warning("No prediction intervals for this model: %s", exc)

    regression = RegressionEntry(
        network=net,
        columns=train.columns,
        normalization=stats,
        context=context,
        bic=chosen.bic,
        cost=cost,
        bic_on=bic_on,
        curve=curve,
        prune_steps=trace.steps,
        eliminated_inputs=[train.columns[i] for i in trace.eliminated_inputs],
    )

    classifier = _train_classifier(cfg, records, raw, train, regression)
    ridge = ridge_fit(raw.values, raw.target, cfg.ridge_lambda, columns=raw.columns) if "lin" in cfg.baselines else None
    logistic, removed = _train_logistic(cfg, raw) if "logistic" in cfg.baselines else (None, [])

    bundle = ModelBundle(
        schema=cfg.schema,
        threshold=cfg.threshold,
        confidence=cfg.confidence,
        seed=cfg.seed,
        train_rows=train.n_rows,
        regression=regression,
        season_months=cfg.season_months,
        dropped_columns=dropped,
        classifier=classifier,
        ridge=ridge,
        logistic=logistic,
        logistic_removed=removed,
    )
    path = save_bundle(bundle, cfg.model_path)

    write_table(
        _out(cfg, "prune_trace.csv"),
        ["step", "kind", "item", "bic_before", "bic_after", "active_parameters"],
        [(s.step, s.kind, s.item, s.bic_before, s.bic_after, s.active_count) for s in trace.steps],
    )
    write_table(
        _out(cfg, "bic_curve.csv"),
        ["hidden_units", "live_units", "bic", "train_bic", "active_parameters", "cost"],
        [(p.hidden_dim, p.live_units, p.bic, p.train_bic, p.active_count, p.cost) for p in curve],
    )
    if lev is not None:
        write_table(_out(cfg, "leverages.csv"), ["row", "leverage"], [(i, float(h)) for i, h in enumerate(lev.leverages)])
    if logistic is not None:
        write_table(_out(cfg, "coefficients.csv"), ["name", "estimate", "std_error", "p_value"], logistic.coefficient_rows())

    record_training(MODEL_NET, cost, chosen.bic, net.hidden_dim, net.active_count)
    log_event(
        {
            "level": "info",
            "msg": "train_finished",
            "model_path": str(path),
            "hidden_units": net.hidden_dim,
            "active_parameters": net.active_count,
            "bic": chosen.bic,
            "train_rows": train.n_rows,
        }
    )
    return TrainOutcome(bundle=bundle, path=path, train_rows=train.n_rows)


def _train_classifier(
    cfg: RunConfig,
    records: list[RawRecord],
    raw: FeatureTable,
    train: FeatureTable,
    regression: RegressionEntry,
) -> Optional[ClassifierEntry]:
    if cfg.target_mode == TARGET_INTERVAL and regression.context is None:
        logger.warning("Classifier skipped: interval targets need the regression interval context")
        return None
    targets = make_targets(
        records,
        cfg.threshold,
        cfg.target_mode,
        regression=regression.network,
        context=regression.context,
        features=train.values,
        alpha=cfg.alpha,
    )
    if targets.single_class:
        logger.warning("Classifier skipped: single-class targets")
        return None

    scaled, minmax = normalize_fit(raw, method="minmax")
    try:
        result = train_classifier(
            scaled,
            targets,
            _train_config(cfg, cfg.classifier_loss),
            hidden_dim=regression.network.hidden_dim,
            mask=regression.network.mask,
        )
    except SingleClass as exc:
        logger.warning("Classifier skipped: %s", exc)
        return None

    record_training(MODEL_CLASSIFIER, result.cost, None, result.network.hidden_dim, result.network.active_count)
    return ClassifierEntry(
        network=result.network,
        columns=scaled.columns,
        normalization=minmax,
        target_mode=cfg.target_mode,
        cost=result.cost,
    )


def _train_logistic(cfg: RunConfig, raw: FeatureTable):
    columns = _logistic_columns(cfg, raw.columns)
    y = (raw.target >= cfg.threshold).astype(int)
    try:
        return logistic_stepwise(raw.select(columns).values, y, columns)
    except ModelError as exc:
        logger.warning("Logistic baseline skipped: %s", exc)
        return None, []


# ---------------------------------------------------------------------------
# ОЦЕНКА
# ---------------------------------------------------------------------------

def _validation_table(cfg: RunConfig, bundle: ModelBundle) -> FeatureTable:
    loaded = load_csv(_require(cfg.validation_csv, "validation CSV"), bundle.schema, season_months=bundle.season_months)
    if not loaded.records:
        raise TooFewRows("validation CSV holds no usable rows")
    table = build_feature_table(loaded.records, bundle.schema, ROLE_VALIDATION)
    return table


def _regression_forecast(bundle: ModelBundle, table: FeatureTable, alpha: float):
    entry = bundle.regression
    X = entry.normalization.apply(table.select(entry.columns)).values
    if entry.context is None:
        points = predict(entry.network, X)
        return points, None
    intervals = prediction_intervals(entry.network, entry.context, X, alpha)
    return np.asarray([iv.point for iv in intervals]), intervals


def _classifier_probabilities(bundle: ModelBundle, table: FeatureTable) -> Optional[np.ndarray]:
    entry = bundle.classifier
    if entry is None:
        return None
    X = entry.normalization.apply(table.select(entry.columns)).values
    return predict(entry.network, X)


def _logistic_probabilities(bundle: ModelBundle, table: FeatureTable) -> Optional[np.ndarray]:
    if bundle.logistic is None:
        return None
    return logistic_probabilities(bundle.logistic, table.select(bundle.logistic.columns).values)


def _write_contingency(path: Path, table) -> None:
    write_table(
        path,
        ["", "observed_yes", "observed_no"],
        [
            ("forecast_yes", table.a, table.f - table.a),
            ("forecast_no", table.m - table.a, table.n - table.m - table.f + table.a),
        ],
    )


def run_evaluate(cfg: RunConfig) -> list[ReportRow]:
    bundle = load_bundle(cfg.model_path)
    table = _validation_table(cfg, bundle)
    observed = table.target
    threshold = bundle.threshold
    observed_flags = _flags(observed, threshold)
    dates = [format_day(d) for d in table.dates]

    points, intervals = _regression_forecast(bundle, table, cfg.alpha)
    if intervals is None:
        logger.warning("Model has no interval context: MLP alarms use point >= threshold")
        net_flags = _flags(points, threshold)
        lower = upper = [None] * len(points)
    else:
        net_flags = np.asarray([exceedance_by_interval(iv, threshold) for iv in intervals])
        lower = [iv.lower for iv in intervals]
        upper = [iv.upper for iv in intervals]

    rows: list[ReportRow] = []
    series = {
        "date": dates,
        "observed": observed,
        "predicted": points,
        "lower": lower,
        "upper": upper,
        "interval_alarm": net_flags.astype(int),
        "observed_exceedance": observed_flags.astype(int),
    }

    ct, exc = _exceedance(net_flags, observed_flags, MODEL_NET)
    rows.append(ReportRow(MODEL_NET, global_fit_report(points, observed), ct, exc))

    if "pers" in cfg.baselines:
        pers = persistence_forecast(observed, table.dates)
        ok = ~np.isnan(pers)
        ct, exc = _exceedance(_flags(pers[ok], threshold), observed_flags[ok], MODEL_PERS)
        rows.append(ReportRow(MODEL_PERS, global_fit_report(pers[ok], observed[ok]), ct, exc))
        series["persistence"] = pers

    if "lin" in cfg.baselines and bundle.ridge is not None:
        lin = predict_linear(bundle.ridge, table.select(bundle.ridge.columns).values)
        ct, exc = _exceedance(_flags(lin, threshold), observed_flags, MODEL_LIN)
        rows.append(ReportRow(MODEL_LIN, global_fit_report(lin, observed), ct, exc))
        series["lin"] = lin

    probs = _classifier_probabilities(bundle, table)
    if probs is not None:
        ct, exc = _exceedance(probs >= DECISION_THRESHOLD, observed_flags, MODEL_CLASSIFIER)
        rows.append(ReportRow(MODEL_CLASSIFIER, None, ct, exc))
        series["probability"] = probs

    if "logistic" in cfg.baselines:
        logit_probs = _logistic_probabilities(bundle, table)
        if logit_probs is not None:
            ct, exc = _exceedance(logit_probs >= DECISION_THRESHOLD, observed_flags, MODEL_LOGISTIC)
            rows.append(ReportRow(MODEL_LOGISTIC, None, ct, exc))
            series["logistic_probability"] = logit_probs

    write_table(_out(cfg, "report.csv"), ["model", *REPORT_COLUMNS], [r.formatted() for r in rows])
    write_json(_out(cfg, "report.json"), [r.to_dict() for r in rows])
    for r in rows:
        if r.table is not None:
            _write_contingency(_out(cfg, f"contingency_{r.model.lower()}.csv"), r.table)
        record_evaluation(r.model, r.values())
        log_event({"level": "info", "msg": "evaluation_row", "model": r.model, **r.values()})

    frame = pd.DataFrame(series)
    frame.to_csv(_out(cfg, EVALUATION_FILE), index=False, lineterminator="\n")
    return rows


# ---------------------------------------------------------------------------
# ПРОГНОЗ
# ---------------------------------------------------------------------------

def run_forecast(cfg: RunConfig, input_csv: str) -> Path:
    bundle = load_bundle(cfg.model_path)
    loaded = load_csv(_require(input_csv, "forecast CSV"), bundle.schema, require_target=False, season_months=None)
    if loaded.report.skipped:
        first = loaded.report.skipped[0]
        raise MissingFeature(first.column, first.row)
    if not loaded.records:
        raise TooFewRows("forecast CSV holds no usable rows")

    table = build_feature_table(loaded.records, bundle.schema, ROLE_VALIDATION)
    points, intervals = _regression_forecast(bundle, table, cfg.alpha)
    probs = _classifier_probabilities(bundle, table)

    rows = []
    for i, day in enumerate(table.dates):
        iv = intervals[i] if intervals is not None else None
        interval_alarm = exceedance_by_interval(iv, bundle.threshold) if iv is not None else bool(points[i] >= bundle.threshold)
        p = float(probs[i]) if probs is not None else None
        rows.append(
            (
                format_day(day),
                float(points[i]),
                iv.lower if iv is not None else None,
                iv.upper if iv is not None else None,
                int(interval_alarm),
                p,
                int(decide(p)) if p is not None else None,
            )
        )

    path = write_table(
        _out(cfg, "forecast.csv"),
        ["date", "point", "lower", "upper", "interval_alarm", "probability", "probability_alarm"],
        rows,
    )
    log_event({"level": "info", "msg": "forecast_written", "path": str(path), "days": len(rows)})
    return path


# ---------------------------------------------------------------------------
# ПЕРЕОБУЧЕНИЕ
# ---------------------------------------------------------------------------

def _dates(frame: pd.DataFrame, column: str) -> list[str]:
    out = []
    for raw in frame[column]:
        day = parse_day(raw)
        out.append(format_day(day) if day else str(raw))
    return out


def append_season(archive_csv: str, season_csv: str, date_column: str, dest: Optional[str | Path] = None) -> int:
    """Append the season rows to the archive, written to `dest` (default: in place). Returns the merged size."""
    archive = pd.read_csv(archive_csv, dtype=str, keep_default_na=False)
    season = pd.read_csv(_require(season_csv, "season CSV"), dtype=str, keep_default_na=False)
    missing = [c for c in archive.columns if c not in season.columns]
    if missing:
        raise MalformedHeader(missing)

    known = set(_dates(archive, date_column))
    conflicts = sorted({d for d in _dates(season, date_column) if d in known})
    if conflicts:
        raise ArchiveConflict(conflicts)

    merged = pd.concat([archive, season[list(archive.columns)]], ignore_index=True)
    target = Path(dest) if dest is not None else Path(archive_csv)
    tmp = target.with_name(target.name + ".tmp")
    merged.to_csv(tmp, index=False, lineterminator="\n")
    tmp.replace(target)
    return len(merged)


def run_retrain(cfg: RunConfig, season_csv: str) -> TrainOutcome:
    if not cfg.archive_csv:
        raise ConfigError("archive_csv is not configured")
    archive = Path(cfg.archive_csv)
    created = not archive.exists()
    if created:
        # первый цикл: архив начинается с прежней обучающей выборки
        archive.parent.mkdir(parents=True, exist_ok=True)
        shutil.copyfile(_require(cfg.train_csv, "train CSV"), archive)
        logger.info("Archive initialized from %s", cfg.train_csv)

    # архив заменяется только после успешного обучения
    staged = archive.with_name(archive.name + ".staged")
    try:
        size = append_season(str(archive), season_csv, cfg.schema.date, dest=staged)
        outcome = run_train(replace(cfg, train_csv=str(staged)))
    except BaseException:
        staged.unlink(missing_ok=True)
        if created:
            archive.unlink(missing_ok=True)
        raise
    staged.replace(archive)
    logger.info("Archive %s now holds %d rows", archive, size)
    text = bundle_text(outcome.bundle)
    version = versioned_path(cfg.model_path, text)
    version.write_text(text, encoding="utf-8")
    log_event({"level": "info", "msg": "retrain_finished", "archive_rows": size, "version": str(version)})
    return TrainOutcome(bundle=outcome.bundle, path=version, train_rows=outcome.train_rows)


# ---------------------------------------------------------------------------
# ДАННЫЕ ДЛЯ ГРАФИКОВ
# ---------------------------------------------------------------------------

def run_plotdata(cfg: RunConfig) -> list[Path]:
    evaluation = read_table(_out(cfg, EVALUATION_FILE), "evaluation artifacts (run `evaluate` first)")
    bundle = load_bundle(cfg.model_path)
    written = []

    written.append(write_table(
        _out(cfg, "plot_timeseries.csv"),
        ["date", "observed", "predicted", "lower", "upper"],
        evaluation[["date", "observed", "predicted", "lower", "upper"]].itertuples(index=False),
    ))
    written.append(write_table(
        _out(cfg, "plot_scatter.csv"),
        ["observed", "predicted"],
        evaluation[["observed", "predicted"]].itertuples(index=False),
    ))
    written.append(write_table(
        _out(cfg, "plot_bic_curve.csv"),
        ["hidden_units", "bic"],
        [(p.hidden_dim, p.bic) for p in bundle.regression.curve],
    ))

    residuals = standardized_residuals(evaluation["predicted"], evaluation["observed"])
    flagged = set(flag_residuals(residuals))
    written.append(write_table(
        _out(cfg, "plot_residuals.csv"),
        ["date", "standardized_residual", "outside_band"],
        [(d, float(r), int(i in flagged)) for i, (d, r) in enumerate(zip(evaluation["date"], residuals))],
    ))
    written.append(write_table(
        _out(cfg, "plot_residual_flags.csv"),
        ["date", "observed", "predicted", "standardized_residual"],
        [
            (evaluation["date"][i], evaluation["observed"][i], evaluation["predicted"][i], float(residuals[i]))
            for i in sorted(flagged)
        ],
    ))
    if "probability" in evaluation.columns:
        written.append(write_table(
            _out(cfg, "plot_probability.csv"),
            ["date", "probability", "observed_exceedance"],
            evaluation[["date", "probability", "observed_exceedance"]].itertuples(index=False),
        ))

    fit = global_fit_report(evaluation["predicted"], evaluation["observed"])
    logger.info(
        "Scatter slope %s ± %s, intercept %s",
        format_number(fit.b1, 2), format_number(fit.b1_se, 2), format_number(fit.b0, 0),
    )
    return written


# ---------------------------------------------------------------------------
# ТОЧКА ВХОДА
# ---------------------------------------------------------------------------

def _common_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON run configuration")
    p.add_argument("--seed", type=int)
    p.add_argument("--threshold", type=float)
    p.add_argument("--confidence", type=float)
    p.add_argument("--hidden-range", dest="hidden_range", help='e.g. "0-3" or "0,1,2"')
    p.add_argument("--balance", help="a,b,theta,mult or none")
    p.add_argument("--target-mode", dest="target_mode", choices=["observed", "interval"])
    p.add_argument("--baselines", help="comma list of pers,lin,logistic")
    p.add_argument("--bic-on", dest="bic_on", choices=["validation", "train"])
    p.add_argument("--model", dest="model_path", help="model bundle path")
    p.add_argument("--out", dest="output_dir", help="output directory for CSV artifacts")
    p.add_argument("--fast-prune", dest="fast_prune", action="store_true", default=None)
    p.add_argument("--noise-interval", dest="noise_interval", action="store_true", default=None)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ozonecast", description="Next-day ozone peak forecasting")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="write a synthetic season")
    p.add_argument("--out", dest="synth_dir", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--n-train", type=int, default=600)
    p.add_argument("--n-validation", type=int, default=105)
    p.add_argument("--train-exceedances", type=int, default=12)
    p.add_argument("--validation-exceedances", type=int, default=7)
    p.add_argument("--threshold", type=float, default=180.0)
    p.add_argument("--start-year", type=int, default=1999)

    p = sub.add_parser("train", help="train, prune and save the model bundle")
    _common_flags(p)
    p.add_argument("--reuse-architecture", dest="reuse_architecture", help="copy hidden size and inputs from MODEL")

    p = sub.add_parser("evaluate", help="score every model on the validation CSV")
    _common_flags(p)

    p = sub.add_parser("forecast", help="forecast new days")
    _common_flags(p)
    p.add_argument("input_csv")

    p = sub.add_parser("retrain", help="append a season to the archive and retrain")
    _common_flags(p)
    p.add_argument("season_csv")

    p = sub.add_parser("plotdata", help="write plot-ready CSV series")
    _common_flags(p)
    return parser


_OVERRIDES = (
    "seed", "threshold", "confidence", "hidden_range", "balance", "target_mode",
    "baselines", "bic_on", "model_path", "output_dir", "fast_prune", "noise_interval",
)


def _run(args: argparse.Namespace) -> None:
    if args.command == "synth":
        spec = SynthSpec(
            n_train=args.n_train,
            n_validation=args.n_validation,
            train_exceedances=args.train_exceedances,
            validation_exceedances=args.validation_exceedances,
            threshold=args.threshold,
            start_year=args.start_year,
            seed=args.seed,
        )
        write_season(args.synth_dir, spec)
        return

    cfg = load_config(args.config)
    cfg = apply_overrides(cfg, {k: getattr(args, k, None) for k in _OVERRIDES})

    if args.command == "train":
        run_train(cfg, reuse_architecture=args.reuse_architecture)
    elif args.command == "evaluate":
        run_evaluate(cfg)
    elif args.command == "forecast":
        run_forecast(cfg, args.input_csv)
    elif args.command == "retrain":
        run_retrain(cfg, args.season_csv)
    elif args.command == "plotdata":
        run_plotdata(cfg)


def main(argv: Optional[Sequence[str]] = None) -> int:
    load_env()
    setup_logging()
    start_metrics_server()

    args = build_parser().parse_args(argv)
    t0 = time.monotonic()
    log_event({"level": "info", "msg": "command_started", "command": args.command})
    try:
        _run(args)
    except OzonecastError as e:
        elapsed = time.monotonic() - t0
        record_command_result(args.command, success=False, duration_sec=elapsed, error=str(e))
        log_event({"level": "error", "msg": "command_failed", "command": args.command, "error": str(e)})
        print(f"ozonecast {args.command}: {e}", file=sys.stderr)
        return e.exit_code
    except Exception as e:
        elapsed = time.monotonic() - t0
        record_command_result(args.command, success=False, duration_sec=elapsed, error=str(e))
        logger.exception("ozonecast %s: internal error: %s", args.command, e)
        return 1

    elapsed = time.monotonic() - t0
    record_command_result(args.command, success=True, duration_sec=elapsed)
    log_event({"level": "info", "msg": "command_finished", "command": args.command, "elapsed_sec": round(elapsed, 2)})
    return 0


if __name__ == "__main__":
    sys.exit(main())
