from datetime import date, timedelta

import numpy as np
import pytest

from ozonecast.dataset import KIND_RAW, FeatureTable


def feature_table(X, y=None, columns=None) -> FeatureTable:
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X.reshape(-1, 1)
    names = tuple(columns) if columns is not None else tuple(f"x{i + 1}" for i in range(X.shape[1]))
    start = date(2003, 4, 1)
    return FeatureTable(
        columns=names,
        kinds=(KIND_RAW,) * len(names),
        values=X,
        target=None if y is None else np.asarray(y, dtype=float),
        dates=tuple(start + timedelta(days=i) for i in range(X.shape[0])),
    )


@pytest.fixture
def make_table():
    return feature_table


@pytest.fixture(autouse=True)
def _isolated_env(tmp_path_factory, monkeypatch):
    monkeypatch.setenv("OZONECAST_LOG_DIR", str(tmp_path_factory.getbasetemp() / "logs"))
    monkeypatch.delenv("METRICS_PORT", raising=False)
    monkeypatch.setenv("OZONECAST_THREADS", "1")
