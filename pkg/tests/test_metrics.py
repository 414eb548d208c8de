import math

import numpy as np
import pytest

from ozonecast.errors import AllExceedances, ConstantObservations, LengthMismatch, NoObservedExceedances, TooShort
from ozonecast.metrics import (
    REPORT_COLUMNS,
    ContingencyTable,
    ReportRow,
    contingency,
    exceedance_report,
    flag_residuals,
    global_fit_report,
    standardized_residuals,
)


def test_perfect_forecast():
    fit = global_fit_report([1.0, 2.0, 3.0], [1.0, 2.0, 3.0])
    assert (fit.mbe, fit.mae, fit.rmse, fit.rmse_s, fit.rmse_u) == (0.0, 0.0, 0.0, 0.0, 0.0)
    assert fit.d == 1.0


def test_fit_hand_evaluation():
    fit = global_fit_report([2.0, 2.0], [1.0, 3.0])
    assert fit.mbe == 0.0
    assert fit.mae == 1.0
    assert fit.rmse == 1.0
    assert fit.d == pytest.approx(0.0)


def test_purely_systematic_bias():
    o = np.array([1.0, 2.0, 3.0])
    fit = global_fit_report(2.0 * o, o)
    assert fit.b1 == pytest.approx(2.0)
    assert fit.b0 == pytest.approx(0.0, abs=1e-12)
    assert fit.rmse_u == pytest.approx(0.0, abs=1e-12)
    assert fit.rmse_s == pytest.approx(fit.rmse)


def test_rmse_decomposition_on_random_inputs():
    rng = np.random.default_rng(0)
    for _ in range(1000):
        n = int(rng.integers(3, 40))
        o = rng.normal(100.0, 30.0, n)
        p = rng.uniform(0.2, 1.5) * o + rng.normal(0.0, 20.0, n)
        fit = global_fit_report(p, o)
        assert fit.rmse_s**2 + fit.rmse_u**2 == pytest.approx(fit.rmse**2, rel=1e-6)


def test_agreement_index_affine_invariance():
    rng = np.random.default_rng(1)
    o = rng.normal(120.0, 25.0, 60)
    p = o + rng.normal(0.0, 15.0, 60)
    d = global_fit_report(p, o).d
    assert 0.0 <= d <= 1.0
    assert global_fit_report(3.0 * p + 40.0, 3.0 * o + 40.0).d == pytest.approx(d, rel=1e-12)


def test_fit_errors():
    with pytest.raises(ConstantObservations):
        global_fit_report([1.0, 2.0], [5.0, 5.0])
    with pytest.raises(LengthMismatch):
        global_fit_report([1.0, 2.0], [1.0, 2.0, 3.0])
    with pytest.raises(TooShort):
        global_fit_report([1.0], [1.0])


def test_contingency_examples():
    flags = [True, False, True, False, False, True, False, False, False, False]
    assert contingency(flags, flags) == ContingencyTable(a=3, f=3, m=3, n=10)
    assert contingency([False] * 10, flags) == ContingencyTable(a=0, f=0, m=3, n=10)
    assert contingency([1, 1, 0, 0], [1, 0, 1, 0]) == ContingencyTable(a=1, f=2, m=2, n=4)


def test_exceedance_report_examples():
    perfect = exceedance_report(ContingencyTable(a=3, f=3, m=3, n=10))
    assert (perfect.tpr, perfect.far, perfect.si) == (1.0, 0.0, 1.0)

    half = exceedance_report(ContingencyTable(a=1, f=2, m=2, n=4))
    assert (half.tpr, half.far, half.si) == (0.5, 0.5, 0.0)


def test_exceedance_report_station_counts():
    report = exceedance_report(ContingencyTable(a=6, f=12, m=7, n=105))
    assert report.tpr == pytest.approx(0.857, abs=1e-3)
    assert report.far == pytest.approx(0.0612, abs=1e-4)
    assert report.si == pytest.approx(0.796, abs=1e-3)


def test_exceedance_report_matches_brute_force():
    rng = np.random.default_rng(2)
    for _ in range(200):
        n = int(rng.integers(5, 60))
        observed = rng.uniform(size=n) < 0.3
        predicted = rng.uniform(size=n) < 0.3
        if observed.sum() == 0 or observed.sum() == n:
            continue
        hits = false_alarms = misses = quiet = 0
        for p, o in zip(predicted, observed):
            hits += p and o
            false_alarms += p and not o
            misses += o and not p
            quiet += not p and not o
        report = exceedance_report(contingency(predicted, observed))
        assert report.tpr == pytest.approx(hits / (hits + misses))
        assert report.far == pytest.approx(false_alarms / (false_alarms + quiet))
        assert report.si == report.tpr - report.far
        assert -1.0 <= report.si <= 1.0


def test_exceedance_report_undefined_rates():
    with pytest.raises(NoObservedExceedances):
        exceedance_report(ContingencyTable(a=0, f=1, m=0, n=10))
    with pytest.raises(AllExceedances):
        exceedance_report(ContingencyTable(a=4, f=4, m=4, n=4))


def test_standardized_residuals_examples():
    assert standardized_residuals([1.0, 2.0, 4.0], [1.0, 2.0, 4.0]).tolist() == [0.0, 0.0, 0.0]
    np.testing.assert_allclose(standardized_residuals([1.0, 3.0], [0.0, 2.0]), [0.7071, 0.7071], atol=1e-4)


def test_standardized_residuals_scale_free():
    rng = np.random.default_rng(3)
    o = rng.normal(100.0, 20.0, 30)
    p = o + rng.normal(0.0, 10.0, 30)
    np.testing.assert_allclose(standardized_residuals(7.5 * p, 7.5 * o), standardized_residuals(p, o), rtol=1e-12)


def test_standardized_residuals_constant_observations():
    with pytest.raises(ConstantObservations):
        standardized_residuals([1.0, 2.0], [3.0, 3.0])


def test_flag_residuals_outside_band():
    assert flag_residuals([0.1, -2.5, 2.0, 3.1, -1.9]) == [1, 3]


def test_report_row_formatting():
    fit = global_fit_report([110.0, 150.0, 190.4, 160.0], [100.0, 160.0, 200.0, 150.0])
    exceedance = exceedance_report(ContingencyTable(a=6, f=12, m=7, n=105))
    row = ReportRow("NN", fit, None, exceedance).formatted()
    assert len(row) == len(REPORT_COLUMNS) + 1
    assert row[0] == "NN"
    assert row[REPORT_COLUMNS.index("FAR") + 1] == "0.06"
    assert row[REPORT_COLUMNS.index("SI") + 1] == "0.80"
    assert "." not in row[REPORT_COLUMNS.index("RMSE") + 1]


def test_report_row_without_exceedance_leaves_cells_blank():
    fit = global_fit_report([1.0, 2.0, 3.5], [1.0, 2.0, 3.0])
    row = ReportRow("PERS", fit).formatted()
    assert row[-2:] == ["", ""]
    assert not math.isnan(float(row[REPORT_COLUMNS.index("d") + 1]))
