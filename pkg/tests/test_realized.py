import datetime as dt

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from asymspill.ingest import IntradayPanel
from asymspill.realized import (
    MeasureKind,
    MeasurePanel,
    daily_returns,
    read_measure_csv,
    realized_measures,
    semivariances,
)


def panel_from_logs(log_prices, assets=("A", "B")):
    log_prices = np.asarray(log_prices, dtype=float)
    days = [dt.date(2012, 1, 2) + dt.timedelta(days=i) for i in range(log_prices.shape[0])]
    times = [dt.time(9, 30)] * log_prices.shape[2]
    return IntradayPanel(list(assets), days, times, np.exp(log_prices), log_prices)


def test_daily_returns_constant():
    p = panel_from_logs([[[1.0, 1.0, 1.0], [0.0, 0.0, 0.0]]])
    np.testing.assert_array_equal(daily_returns(p, 0, 0), [0.0, 0.0])


def test_daily_returns_differences():
    p = panel_from_logs([[[0.0, 0.01, -0.01], [0.0, 0.0, 0.0]]])
    np.testing.assert_allclose(daily_returns(p, 0, 0), [0.01, -0.02], rtol=0, atol=1e-15)


def test_daily_returns_length():
    rng = np.random.default_rng(0)
    p = panel_from_logs(rng.normal(size=(1, 2, 79)))
    assert daily_returns(p, 0, 1).shape == (78,)


def test_hand_example():
    rv, rsm, rsp = semivariances([0.01, -0.02, 0.03])
    assert rv == pytest.approx(0.0014, rel=1e-12)
    assert rsm == pytest.approx(0.0004, rel=1e-12)
    assert rsp == pytest.approx(0.0010, rel=1e-12)


def test_all_negative():
    rv, rsm, rsp = semivariances([-0.1, -0.2, -0.05])
    assert rsp == 0.0
    assert rv == rsm


def test_zero_returns_enter_neither():
    rv, rsm, rsp = semivariances([0.0, 0.0])
    assert (rv, rsm, rsp) == (0.0, 0.0, 0.0)


def test_panel_measures_match_vector_version():
    rng = np.random.default_rng(1)
    logs = np.cumsum(rng.normal(scale=0.01, size=(4, 2, 79)), axis=2)
    m = realized_measures(panel_from_logs(logs))
    for d in range(4):
        for a in range(2):
            rv, rsm, rsp = semivariances(np.diff(logs[d, a]))
            assert m[MeasureKind.RV].values[d, a] == pytest.approx(rv, rel=1e-14)
            assert m[MeasureKind.RS_MINUS].values[d, a] == pytest.approx(rsm, rel=1e-14)
            assert m[MeasureKind.RS_PLUS].values[d, a] == pytest.approx(rsp, rel=1e-14)


returns_strategy = arrays(
    np.float64,
    st.integers(1, 200),
    elements=st.floats(-1.0, 1.0, allow_nan=False, allow_subnormal=False),
)


@given(returns_strategy)
def test_decomposition_identity(r):
    rv, rsm, rsp = semivariances(r)
    assert abs(rv - (rsm + rsp)) <= 1e-12 * max(rv, 1e-300)
    assert rv >= 0 and rsm >= 0 and rsp >= 0


@given(returns_strategy)
def test_sign_flip_swaps(r):
    rv, rsm, rsp = semivariances(r)
    rv2, rsm2, rsp2 = semivariances(-r)
    assert rv2 == rv
    assert rsm2 == rsp and rsp2 == rsm


@settings(max_examples=50)
@given(returns_strategy, st.floats(0.01, 100.0))
def test_scaling(r, c):
    base = np.array(semivariances(r))
    scaled = np.array(semivariances(c * r))
    np.testing.assert_allclose(scaled, c * c * base, rtol=1e-12, atol=1e-300)


def test_measure_csv_roundtrip(tmp_path):
    rng = np.random.default_rng(2)
    vals = rng.gamma(2.0, size=(3, 2)) * 1e-4
    mp = MeasurePanel(MeasureKind.RS_PLUS, [dt.date(2012, 1, d) for d in (3, 4, 5)],
                      ["X", "Y"], vals)
    path = tmp_path / "m.csv"
    mp.write_csv(path)
    back = read_measure_csv(path, MeasureKind.RS_PLUS)
    assert back.assets == ["X", "Y"]
    assert back.dates == mp.dates
    np.testing.assert_array_equal(back.values, vals)
    assert path.read_text().splitlines()[0] == "date,X,Y"


def test_log_transform():
    mp = MeasurePanel(MeasureKind.RV, [dt.date(2012, 1, 3)], ["X", "Y"], [[1.0, 0.0]])
    out = mp.log_transformed()
    np.testing.assert_allclose(out.values, [[np.log(1.0 + 1e-12), np.log(1e-12)]])
