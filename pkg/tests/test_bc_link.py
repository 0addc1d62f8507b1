import numpy as np
import pytest
from hypothesis import given, strategies as st

from vlcambc.ambd import SwitchWaveform, apply_reflection
from vlcambc.bc_link import (BcGeometry, RfSourceConfig, RxFrontEndConfig, backscatter_amplitude,
                             backscatter_capture, direct_path_gain, friis_gain, link_budget_rss)
from vlcambc.sigcore import ComplexWaveform


def test_worked_budget():
    assert link_budget_rss(RfSourceConfig(0.0), BcGeometry(0.5, 0.5, wavelength=0.125)) == pytest.approx(-68.05, abs=0.005)


def test_budget_by_hand():
    lam, d1, d2, p = 0.3, 0.7, 1.1, 10.0
    watts = 1e-2 * lam ** 4 / ((4 * np.pi) ** 4 * d1 ** 2 * d2 ** 2)
    got = link_budget_rss(RfSourceConfig(p), BcGeometry(d1, d2, wavelength=lam))
    assert got == pytest.approx(10 * np.log10(watts * 1e3))


@given(st.floats(0.05, 5), st.floats(-30, 30))
def test_distance_and_power_scaling(d, p):
    g = BcGeometry(d_rx_bd=d)
    base = link_budget_rss(RfSourceConfig(p), g)
    assert link_budget_rss(RfSourceConfig(p), BcGeometry(d_rx_bd=2 * d)) - base == pytest.approx(-6.0206, abs=1e-4)
    assert link_budget_rss(RfSourceConfig(p + 5), g) - base == pytest.approx(5.0)


def test_modulation_factor_and_gains():
    g = BcGeometry()
    assert link_budget_rss(RfSourceConfig(), BcGeometry(mod_factor=0.25)) == pytest.approx(
        link_budget_rss(RfSourceConfig(), g) - 6.0206, abs=1e-4)
    assert link_budget_rss(RfSourceConfig(), BcGeometry(g_bd=2.0)) == pytest.approx(
        link_budget_rss(RfSourceConfig(), g) + 6.0206, abs=1e-4)


def test_friis_and_direct_path():
    assert friis_gain(1.0, 4 * np.pi) == pytest.approx(1.0)
    g = BcGeometry(0.3, 0.4)
    assert g.tx_rx_distance == pytest.approx(0.5)
    assert direct_path_gain(g, RxFrontEndConfig(direct_path_gain=0.1)) == 0.1


def test_capture_power_matches_budget():
    states = np.tile([0, 1], 5000)
    refl = apply_reflection(SwitchWaveform(states, 200e3))
    g = BcGeometry()
    y = backscatter_capture(refl, RfSourceConfig(0.0), g, RxFrontEndConfig(noise_floor_dbm=None), 1)
    x = y.samples - y.samples.mean()
    assert 10 * np.log10(np.mean(np.abs(x) ** 2) * 1e3) == pytest.approx(link_budget_rss(RfSourceConfig(), g))
    assert abs(backscatter_amplitude(0.0, g)) > 0


def test_capture_noise_and_rate_check():
    refl = ComplexWaveform(np.ones(100_000), 200e3)
    y = backscatter_capture(refl, RfSourceConfig(0.0), BcGeometry(), RxFrontEndConfig(noise_floor_dbm=-80), 2)
    x = y.samples - y.samples.mean()
    assert np.mean(np.abs(x) ** 2) == pytest.approx(1e-11, rel=0.02)
    with pytest.raises(ValueError):
        backscatter_capture(ComplexWaveform(np.ones(10), 100e3), RfSourceConfig(), BcGeometry(),
                            RxFrontEndConfig(), 0)


@pytest.mark.parametrize("kw", [dict(d_tx_bd=0), dict(g_rx=0), dict(mod_factor=1.5), dict(wavelength=-1)])
def test_geometry_rejects(kw):
    with pytest.raises(ValueError):
        BcGeometry(**kw)
