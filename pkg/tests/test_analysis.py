import numpy as np
import pytest
from hypothesis import given, strategies as st

from vlcambc.analysis import (MetricGrid, SensitivityReport, axis_sensitivity, binomial_ci, loglog_slope,
                              normalize_pair, sensitivity, theory_ber_ncfsk, theory_rss_curve)
from vlcambc.bc_link import BcGeometry, RfSourceConfig, link_budget_rss


def test_theory_values():
    assert theory_ber_ncfsk(0.0) == 0.5
    assert theory_ber_ncfsk(1.0) == pytest.approx(0.30327, abs=5e-6)
    assert theory_ber_ncfsk(10.0) == pytest.approx(3.369e-3, abs=5e-7)
    with pytest.raises(ValueError):
        theory_ber_ncfsk(-1.0)
    with pytest.raises(ValueError):
        theory_ber_ncfsk(float("nan"))


@given(st.floats(0, 50), st.floats(0, 50))
def test_theory_monotone(a, b):
    lo, hi = sorted((a, b))
    assert theory_ber_ncfsk(hi) <= theory_ber_ncfsk(lo)


def test_binomial_ci():
    lo, hi = binomial_ci(0.5, 100)
    assert (lo, hi) == pytest.approx((0.35, 0.65))
    assert binomial_ci(0.0, 10) == (0.0, 0.0)


def test_rss_curve():
    d = [0.1 * k for k in range(1, 10)]
    curve = theory_rss_curve(RfSourceConfig(), d)
    rss = [r for _, r in curve]
    assert len(curve) == 9 and np.all(np.diff(rss) < 0)
    # inverse-square in d_rx: 20 log10(9)
    assert rss[0] - rss[-1] == pytest.approx(20 * np.log10(9), abs=1e-9)
    assert rss[0] - rss[-1] == pytest.approx(19.085, abs=1e-3)
    assert loglog_slope(d, rss) == pytest.approx(-20.0)
    one = theory_rss_curve(RfSourceConfig(), [BcGeometry(d_rx_bd=0.4)])
    assert one == [(0.4, link_budget_rss(RfSourceConfig(), BcGeometry(d_rx_bd=0.4)))]


def linear_grid(kind="k", cv=2.0, cb=1.0):
    """RSS linear in both distances (per cm): |dRSS/dcm| = cv along d_led and cb along d_rx."""
    g = MetricGrid()
    for dl in (0.2, 0.3, 0.4):
        g.add(kind, dl, 0.5, 0.0, ber=0.1, rss=-cv * dl * 100 - cb * 50, n_bits=1)
    for dr in (0.1, 0.3, 0.5):
        g.add(kind, 0.3, dr, 0.0, ber=0.1, rss=-cv * 30 - cb * dr * 100, n_bits=1)
    return g


def test_sensitivity_linear_field():
    v, b = sensitivity(linear_grid(), "rss", "k")
    assert (v, b) == pytest.approx((2 / 3, 1 / 3))
    assert axis_sensitivity(linear_grid(), "rss", "k", "vlc") == pytest.approx(2.0)
    # flat BER on both axes -> even split
    assert sensitivity(linear_grid(), "ber", "k") == (0.5, 0.5)


def test_sensitivity_uses_log_ber():
    g = MetricGrid()
    for dl in (0.2, 0.3):
        g.add("k", dl, 0.5, 0.0, ber=1e-3, rss=0.0, n_bits=1)
    for dr, b in ((0.5, 1e-3), (0.6, 1e-2)):
        g.add("k", 0.3, dr, 0.0, ber=b, rss=0.0, n_bits=1)
    assert axis_sensitivity(g, "ber", "k", "bc") == pytest.approx(0.1)
    assert sensitivity(g, "ber", "k") == pytest.approx((0.0, 1.0))


def test_sensitivity_errors():
    with pytest.raises(ValueError):
        axis_sensitivity(linear_grid(), "snr", "k", "vlc")
    with pytest.raises(ValueError):
        axis_sensitivity(linear_grid(), "rss", "other", "vlc")


@given(st.floats(0, 1e6), st.floats(0, 1e6))
def test_normalize_pair(a, b):
    v, w = normalize_pair(a, b)
    assert v + w == pytest.approx(1.0)
    assert 0 <= v <= 1


def test_report_table():
    rep = SensitivityReport.from_grid(linear_grid())
    assert rep.rows[("k", "rss")] == pytest.approx((2 / 3, 1 / 3))
    assert "rss" in rep.table()
