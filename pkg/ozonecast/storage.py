"""
storage.py: файл модели (JSON) и CSV-артефакты.

Файл модели один JSON-документ с тегированными записями (regression, classifier,
ridge, logistic) и всем нужным для повторного прогноза: схема, входные колонки,
статистики нормализации, кэшированный контекст интервалов. Ключи отсортированы,
числа записаны в кратчайшей обратимой форме, времени нет: два обучения на одних
данных с одним сидом дают одинаковые файлы.
"""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Optional, Sequence

import pandas as pd

from ozonecast.baselines import LinearModel, LogisticModel, StepwiseRemoval
from ozonecast.dataset import Normalization, Schema
from ozonecast.errors import DataError, MissingArtifact
from ozonecast.mlp import Network
from ozonecast.pruning import CurvePoint, PruneStep
from ozonecast.uncertainty import IntervalContext

BUNDLE_FORMAT = 1


@dataclass
class RegressionEntry:
    network: Network
    columns: tuple[str, ...]
    normalization: Normalization
    context: Optional[IntervalContext]
    bic: float
    cost: float
    bic_on: str
    curve: list[CurvePoint] = field(default_factory=list)
    prune_steps: list[PruneStep] = field(default_factory=list)
    eliminated_inputs: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "kind": "regression",
            "network": self.network.to_dict(),
            "columns": list(self.columns),
            "normalization": self.normalization.to_dict(),
            "context": self.context.to_dict() if self.context is not None else None,
            "bic": self.bic,
            "cost": self.cost,
            "bic_on": self.bic_on,
            "curve": [vars(p) for p in self.curve],
            "prune_steps": [vars(s) for s in self.prune_steps],
            "eliminated_inputs": list(self.eliminated_inputs),
        }

    @classmethod
    def from_dict(cls, raw: dict) -> "RegressionEntry":
        return cls(
            network=Network.from_dict(raw["network"]),
            columns=tuple(raw["columns"]),
            normalization=Normalization.from_dict(raw["normalization"]),
            context=IntervalContext.from_dict(raw["context"]) if raw.get("context") else None,
            bic=float(raw["bic"]),
            cost=float(raw["cost"]),
            bic_on=raw.get("bic_on", "validation"),
            curve=[CurvePoint(**p) for p in raw.get("curve", [])],
            prune_steps=[PruneStep(**s) for s in raw.get("prune_steps", [])],
            eliminated_inputs=list(raw.get("eliminated_inputs", [])),
        )


@dataclass
class ClassifierEntry:
    network: Network
    columns: tuple[str, ...]
    normalization: Normalization
    target_mode: str
    cost: float

    def to_dict(self) -> dict:
        return {
            "kind": "classifier",
            "network": self.network.to_dict(),
            "columns": list(self.columns),
            "normalization": self.normalization.to_dict(),
            "target_mode": self.target_mode,
            "cost": self.cost,
        }

    @classmethod
    def from_dict(cls, raw: dict) -> "ClassifierEntry":
        return cls(
            network=Network.from_dict(raw["network"]),
            columns=tuple(raw["columns"]),
            normalization=Normalization.from_dict(raw["normalization"]),
            target_mode=raw["target_mode"],
            cost=float(raw["cost"]),
        )


@dataclass
class ModelBundle:
    schema: Schema
    threshold: float
    confidence: float
    seed: int
    train_rows: int
    regression: RegressionEntry
    season_months: Optional[tuple[int, ...]] = None
    dropped_columns: list[str] = field(default_factory=list)
    classifier: Optional[ClassifierEntry] = None
    ridge: Optional[LinearModel] = None
    logistic: Optional[LogisticModel] = None
    logistic_removed: list[StepwiseRemoval] = field(default_factory=list)

    def to_dict(self) -> dict:
        entries: dict[str, Any] = {"regression": self.regression.to_dict()}
        if self.classifier is not None:
            entries["classifier"] = self.classifier.to_dict()
        if self.ridge is not None:
            entries["ridge"] = {"kind": "ridge", **self.ridge.to_dict()}
        if self.logistic is not None:
            entries["logistic"] = {
                "kind": "logistic",
                **self.logistic.to_dict(),
                "removed": [vars(r) for r in self.logistic_removed],
            }
        return {
            "format": BUNDLE_FORMAT,
            "schema": self.schema.to_dict(),
            "threshold": self.threshold,
            "confidence": self.confidence,
            "seed": self.seed,
            "train_rows": self.train_rows,
            "season_months": list(self.season_months) if self.season_months is not None else None,
            "dropped_columns": list(self.dropped_columns),
            "entries": entries,
        }

    @classmethod
    def from_dict(cls, raw: dict) -> "ModelBundle":
        if raw.get("format") != BUNDLE_FORMAT:
            raise DataError(f"unsupported model format {raw.get('format')!r}")
        entries = raw["entries"]
        logistic = entries.get("logistic")
        return cls(
            schema=Schema.from_dict(raw["schema"]),
            threshold=float(raw["threshold"]),
            confidence=float(raw["confidence"]),
            seed=int(raw["seed"]),
            train_rows=int(raw["train_rows"]),
            regression=RegressionEntry.from_dict(entries["regression"]),
            season_months=tuple(raw["season_months"]) if raw.get("season_months") is not None else None,
            dropped_columns=list(raw.get("dropped_columns", [])),
            classifier=ClassifierEntry.from_dict(entries["classifier"]) if "classifier" in entries else None,
            ridge=LinearModel.from_dict(entries["ridge"]) if "ridge" in entries else None,
            logistic=LogisticModel.from_dict(logistic) if logistic else None,
            logistic_removed=[StepwiseRemoval(**r) for r in (logistic or {}).get("removed", [])],
        )


def bundle_text(bundle: ModelBundle) -> str:
    return json.dumps(bundle.to_dict(), sort_keys=True, indent=2, ensure_ascii=False, allow_nan=False) + "\n"


def _atomic_write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text, encoding="utf-8")
    os.replace(tmp, path)


def save_bundle(bundle: ModelBundle, path: str | Path) -> Path:
    path = Path(path)
    _atomic_write(path, bundle_text(bundle))
    return path


def load_bundle(path: str | Path) -> ModelBundle:
    path = Path(path)
    if not path.exists():
        raise MissingArtifact(str(path), "model file")
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise DataError(f"model file {path} is not valid JSON: {exc}") from None
    try:
        return ModelBundle.from_dict(raw)
    except (KeyError, TypeError, ValueError) as exc:
        raise DataError(f"model file {path} is incomplete: {exc}") from None


def content_hash(text: str, length: int = 12) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()[:length]


def versioned_path(path: str | Path, text: str) -> Path:
    """models/ozonecast.json -> models/ozonecast-<hash>.json"""
    path = Path(path)
    return path.with_name(f"{path.stem}-{content_hash(text)}{path.suffix}")


# ---------------------------------------------------------------------------
# CSV И ТЕКСТ
# ---------------------------------------------------------------------------

def write_table(path: str | Path, columns: Sequence[str], rows: Iterable[Sequence[Any]]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame = pd.DataFrame([list(r) for r in rows], columns=list(columns))
    frame.to_csv(path, index=False, lineterminator="\n")
    return path


def read_table(path: str | Path, what: str = "table") -> pd.DataFrame:
    path = Path(path)
    if not path.exists():
        raise MissingArtifact(str(path), what)
    return pd.read_csv(path, keep_default_na=True)


def write_lines(path: str | Path, lines: Iterable[str]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("".join(f"{line}\n" for line in lines), encoding="utf-8")
    return path


def write_json(path: str | Path, payload: Any) -> Path:
    path = Path(path)
    _atomic_write(path, json.dumps(payload, sort_keys=True, indent=2, ensure_ascii=False, default=str) + "\n")
    return path
