import numpy as np
import pytest
from hypothesis import given, strategies as st

from vlcambc.energy import (EnergyStore, LpfSpec, PowerProfile, average_load, energy_neutral_margin,
                            harvest_step, harvested_power, lowpass_steady_state, powered_trajectory, pv_split,
                            supercap_bank)
from vlcambc.sigcore import RealWaveform


def test_bank_topologies():
    assert supercap_bank(4, 0.1, "parallel").capacitance == pytest.approx(0.4)
    assert supercap_bank(4, 0.1, "series").capacitance == pytest.approx(0.025)
    with pytest.raises(ValueError):
        supercap_bank(4, 0.1, "mesh")


def test_usable_energy_of_default_bank():
    s = supercap_bank()
    full, empty = EnergyStore(s.capacitance, 3.3), EnergyStore(s.capacitance, 1.8)
    assert full.energy - empty.energy == pytest.approx(1.53, abs=1e-6)


@given(st.floats(0, 1e-2), st.floats(0, 1e-2), st.floats(1e-3, 10.0))
def test_harvest_step_conserves_energy_until_clipped(ph, pl, dt):
    s = EnergyStore(0.4, 2.5)
    t = harvest_step(s, ph, pl, dt)
    expect = min(max(s.energy + (ph - pl) * dt, 0.0), s.capacity)
    assert t.energy == pytest.approx(expect, rel=1e-9, abs=1e-12)
    assert 0 <= t.voltage <= t.v_max


def test_harvest_step_rejects():
    with pytest.raises(ValueError):
        harvest_step(EnergyStore(), 1.0, 1.0, 0.0)
    with pytest.raises(ValueError):
        harvest_step(EnergyStore(), -1.0, 1.0, 1.0)


def test_store_validation():
    with pytest.raises(ValueError):
        EnergyStore(voltage=4.0)
    with pytest.raises(ValueError):
        EnergyStore(v_min_operate=3.5)


def test_margin_is_harvest_minus_weighted_load():
    prof = PowerProfile({"a": 2.0, "b": 10.0})
    duty = {"a": 0.75, "b": 0.25}
    assert average_load(prof, duty) == pytest.approx(4.0)
    assert energy_neutral_margin(prof, duty, 5.0) == pytest.approx(1.0)
    with pytest.raises(ValueError):
        energy_neutral_margin(prof, {"a": 0.5}, 5.0)


def test_powered_trajectory_drops_out():
    s = EnergyStore(0.4, 1.9)
    traj = powered_trajectory(s, 0.0, 0.1, 0.1, 20)
    assert traj[0] and not traj[-1]
    assert np.all(np.diff(traj.astype(int)) <= 0)


def test_lowpass_dc_gain_and_split():
    fs = 200e3
    n = np.arange(5000)
    x = 0.7 + 0.2 * np.sin(2 * np.pi * 6000 * n / fs)
    y = lowpass_steady_state(x, fs, LpfSpec(100.0))
    assert y.mean() == pytest.approx(0.7)
    dc, ac = pv_split(RealWaveform(x, fs))
    assert dc == pytest.approx(0.7)
    assert abs(ac.samples.mean()) < 1e-12
    # a 6 kHz tone passes to the AC branch almost untouched
    assert np.std(ac.samples) == pytest.approx(0.2 / np.sqrt(2), rel=1e-3)


def test_harvested_power():
    assert harvested_power(1.0, 1000.0, 0.9) == pytest.approx(9e-4)


def test_lpf_rejects():
    with pytest.raises(ValueError):
        LpfSpec(0.0)
