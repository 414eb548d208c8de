from __future__ import annotations

import os
import time
from typing import Optional

from prometheus_client import Gauge, Info, start_http_server

_STARTED = False

_RUN_INFO = Info(
    "ozonecast_run_info",
    "Last command metadata",
)

COMMAND_LAST_SUCCESS = Gauge(
    "ozonecast_command_last_success",
    "Last run of the command succeeded (1) or failed (0)",
    ["command"],
)

COMMAND_LAST_DURATION_SECONDS = Gauge(
    "ozonecast_command_last_duration_seconds",
    "Duration of the last run of the command",
    ["command"],
)

COMMAND_LAST_TIMESTAMP = Gauge(
    "ozonecast_command_last_timestamp",
    "Unix timestamp of the last run of the command",
    ["command"],
)

TRAIN_LAST_COST = Gauge(
    "ozonecast_train_last_cost",
    "Final training cost E of the last trained model",
    ["model"],
)

TRAIN_LAST_BIC = Gauge(
    "ozonecast_train_last_bic",
    "BIC-like criterion of the last trained model",
    ["model"],
)

TRAIN_HIDDEN_UNITS = Gauge(
    "ozonecast_train_hidden_units",
    "Hidden units of the last trained model",
    ["model"],
)

TRAIN_ACTIVE_PARAMETERS = Gauge(
    "ozonecast_train_active_parameters",
    "Unmasked parameters of the last trained model",
    ["model"],
)

EVAL_LAST_INDEX = Gauge(
    "ozonecast_eval_last_index",
    "Last evaluation index value",
    ["model", "index"],
)


def start_metrics_server() -> None:
    global _STARTED
    if _STARTED:
        return

    port = os.getenv("METRICS_PORT")
    if not port:
        return
    addr = os.getenv("METRICS_ADDR", "0.0.0.0")
    start_http_server(int(port), addr)
    _STARTED = True


def record_command_result(
    command: str,
    success: bool,
    duration_sec: float,
    error: Optional[str] = None,
) -> None:
    COMMAND_LAST_SUCCESS.labels(command).set(1 if success else 0)
    COMMAND_LAST_DURATION_SECONDS.labels(command).set(duration_sec)
    COMMAND_LAST_TIMESTAMP.labels(command).set(time.time())

    _RUN_INFO.info(
        {
            "command": command,
            "success": "1" if success else "0",
            "error": error or "",
        }
    )


def record_training(
    model: str,
    cost: float,
    bic: Optional[float],
    hidden_units: int,
    active_parameters: int,
) -> None:
    TRAIN_LAST_COST.labels(model).set(cost)
    if bic is not None:
        TRAIN_LAST_BIC.labels(model).set(bic)
    TRAIN_HIDDEN_UNITS.labels(model).set(hidden_units)
    TRAIN_ACTIVE_PARAMETERS.labels(model).set(active_parameters)


def record_evaluation(model: str, indices: dict[str, Optional[float]]) -> None:
    for name, value in indices.items():
        if value is None:
            continue
        EVAL_LAST_INDEX.labels(model, name).set(value)
