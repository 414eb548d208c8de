from __future__ import annotations

import json
import os
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Any, Optional

from dotenv import load_dotenv

from ozonecast.common.text import parse_balance, parse_csv_list, parse_hidden_range
from ozonecast.common.time import DEFAULT_SEASON_MONTHS
from ozonecast.dataset import BalanceSpec, Schema
from ozonecast.errors import ConfigError

BASELINE_NAMES = ("pers", "lin", "logistic")
TARGET_MODES = ("observed", "interval")
BIC_SETS = ("validation", "train")
CLASSIFIER_LOSSES = ("squared", "cross_entropy")


def load_env() -> None:
    """Read `.env` from the working directory; already exported variables win."""
    load_dotenv(override=False)


@dataclass(frozen=True)
class RunConfig:
    train_csv: Optional[str] = None
    validation_csv: Optional[str] = None
    model_path: str = "models/ozonecast.json"
    output_dir: str = "out"
    archive_csv: Optional[str] = None
    schema: Schema = field(default_factory=Schema)
    season_months: Optional[tuple[int, ...]] = DEFAULT_SEASON_MONTHS

    threshold: float = 180.0
    confidence: float = 0.95
    hidden_range: tuple[int, ...] = (0, 1, 2, 3)
    balance: Optional[dict[str, float]] = None
    seed: int = 0
    baselines: tuple[str, ...] = BASELINE_NAMES
    target_mode: str = "observed"
    bic_on: str = "validation"

    restarts: int = 4
    max_iterations: int = 500
    prune_iterations: int = 50
    fast_prune: bool = False
    noise_interval: bool = False
    ridge_lambda: float = 0.05
    classifier_loss: str = "squared"

    def __post_init__(self) -> None:
        self.validate()

    def validate(self) -> None:
        if not self.threshold > 0:
            raise ConfigError(f"threshold must be > 0, got {self.threshold}")
        if not 0 < self.confidence < 1:
            raise ConfigError(f"confidence must be in (0, 1), got {self.confidence}")
        if not self.hidden_range:
            raise ConfigError("hidden unit range is empty")
        if any(n < 0 for n in self.hidden_range):
            raise ConfigError("hidden unit counts must be >= 0")
        if 0 not in self.hidden_range:
            raise ConfigError("hidden unit range must include 0 (the linear model)")
        unknown = [b for b in self.baselines if b not in BASELINE_NAMES]
        if unknown:
            raise ConfigError(f"unknown baselines: {', '.join(unknown)}")
        if self.target_mode not in TARGET_MODES:
            raise ConfigError(f"target_mode must be one of {TARGET_MODES}, got {self.target_mode!r}")
        if self.bic_on not in BIC_SETS:
            raise ConfigError(f"bic_on must be one of {BIC_SETS}, got {self.bic_on!r}")
        if self.classifier_loss not in CLASSIFIER_LOSSES:
            raise ConfigError(f"classifier_loss must be one of {CLASSIFIER_LOSSES}")
        if self.restarts < 1 or self.max_iterations < 1 or self.prune_iterations < 1:
            raise ConfigError("restarts, max_iterations and prune_iterations must be >= 1")
        if self.ridge_lambda < 0:
            raise ConfigError("ridge_lambda must be >= 0")
        self.balance_spec()

    @property
    def alpha(self) -> float:
        return 1.0 - self.confidence

    def balance_spec(self) -> Optional[BalanceSpec]:
        if self.balance is None:
            return None
        b = self.balance
        return BalanceSpec(
            threshold=float(b.get("theta", self.threshold)),
            a=float(b.get("a", 1.0)),
            b=float(b.get("b", 0.0125)),
            multiplier=int(b.get("multiplier", 1)),
        )

    def to_dict(self) -> dict[str, Any]:
        out: dict[str, Any] = {}
        for f in fields(self):
            value = getattr(self, f.name)
            if isinstance(value, Schema):
                value = value.to_dict()
            elif isinstance(value, tuple):
                value = list(value)
            out[f.name] = value
        return out

    @classmethod
    def from_dict(cls, raw: dict[str, Any]) -> "RunConfig":
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(raw) - known)
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(unknown)}")

        kwargs = dict(raw)
        if "schema" in kwargs:
            kwargs["schema"] = Schema.from_dict(kwargs["schema"] or {})
        if "hidden_range" in kwargs:
            value = kwargs["hidden_range"]
            kwargs["hidden_range"] = tuple(parse_hidden_range(value) if isinstance(value, str) else sorted(set(value)))
        if "baselines" in kwargs:
            value = kwargs["baselines"]
            kwargs["baselines"] = tuple(parse_csv_list(value) if isinstance(value, str) else value)
        if "season_months" in kwargs and kwargs["season_months"] is not None:
            kwargs["season_months"] = tuple(int(m) for m in kwargs["season_months"])
        if isinstance(kwargs.get("balance"), str):
            kwargs["balance"] = _balance_flag(kwargs["balance"])
        try:
            return cls(**kwargs)
        except TypeError as exc:
            raise ConfigError(str(exc)) from None


def _balance_flag(value: str) -> Optional[dict[str, float]]:
    try:
        return parse_balance(value)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def load_config(path: Optional[str | Path]) -> RunConfig:
    if path is None:
        return RunConfig()
    path = Path(path)
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file {path} is not valid JSON: {exc}") from None
    if not isinstance(raw, dict):
        raise ConfigError(f"config file {path} must hold a JSON object")

    # относительные пути считаются от каталога файла конфигурации
    for key in ("train_csv", "validation_csv", "archive_csv", "model_path", "output_dir"):
        value = raw.get(key)
        if isinstance(value, str) and value and not os.path.isabs(value):
            raw[key] = str(path.parent / value)
    return RunConfig.from_dict(raw)


def apply_overrides(cfg: RunConfig, overrides: dict[str, Any]) -> RunConfig:
    """Flag values win over the file; None means "flag not given"."""
    changes: dict[str, Any] = {}
    for key, value in overrides.items():
        if value is None:
            continue
        if key == "hidden_range":
            value = tuple(parse_hidden_range(value))
        elif key == "baselines":
            value = tuple(parse_csv_list(value))
        elif key == "balance":
            value = _balance_flag(value)
        changes[key] = value
    if not changes:
        return cfg
    try:
        return replace(cfg, **changes)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None
