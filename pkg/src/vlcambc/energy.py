"""Harvesting, DC/AC splitting, supercapacitor storage and energy-neutrality bookkeeping."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Mapping

import numpy as np

from .sigcore import RealWaveform

STATES = ("sleep", "decode", "sense", "modulate")


@dataclass(frozen=True)
class EnergyStore:
    capacitance: float = 0.4  # four 0.1 F cells in parallel
    voltage: float = 3.0
    v_max: float = 3.3
    v_min_operate: float = 1.8

    def __post_init__(self):
        if self.capacitance <= 0:
            raise ValueError("capacitance must be positive")
        if not self.v_min_operate < self.v_max:
            raise ValueError("v_min_operate must be below v_max")
        if not 0 <= self.voltage <= self.v_max:
            raise ValueError("store voltage must lie in [0, v_max]")

    @property
    def energy(self) -> float:
        return 0.5 * self.capacitance * self.voltage ** 2

    @property
    def capacity(self) -> float:
        return 0.5 * self.capacitance * self.v_max ** 2

    @property
    def powered(self) -> bool:
        return self.voltage >= self.v_min_operate


def supercap_bank(n_cells: int = 4, cell_capacitance: float = 0.1, topology: str = "parallel", **kw) -> EnergyStore:
    if topology == "parallel":
        c = n_cells * cell_capacitance
    elif topology == "series":
        c = cell_capacitance / n_cells
    else:
        raise ValueError("topology must be 'parallel' or 'series'")
    return EnergyStore(capacitance=c, **kw)


@dataclass(frozen=True)
class PowerProfile:
    # Placeholder draws in watts; no prototype measurements are available.
    draws: Mapping[str, float] = field(default_factory=lambda: {
        "sleep": 1e-6, "decode": 100e-6, "sense": 500e-6, "modulate": 50e-6})

    def __post_init__(self):
        if any(v < 0 for v in self.draws.values()):
            raise ValueError("power draws must be non-negative")

    def __getitem__(self, state):
        return self.draws[state]


@dataclass(frozen=True)
class LpfSpec:
    cutoff: float = 100.0
    order: int = 1

    def __post_init__(self):
        if self.cutoff <= 0:
            raise ValueError("cutoff must be positive")
        if self.order < 1:
            raise ValueError("order must be a positive integer")


def lowpass_steady_state(x: np.ndarray, sample_rate: float, lpf: LpfSpec) -> np.ndarray:
    """Periodic steady-state response of an ``order``-pole RC low-pass along the last axis.

    Evaluated in the frequency domain so the DC gain is exactly one and there
    is no start-up transient.
    """
    n = x.shape[-1]
    f = np.fft.rfftfreq(n, d=1.0 / sample_rate)
    h = (1.0 / (1.0 + 1j * f / lpf.cutoff)) ** lpf.order
    return np.fft.irfft(np.fft.rfft(x, axis=-1) * h, n=n, axis=-1)


def pv_split_array(pv: np.ndarray, sample_rate: float, lpf: LpfSpec):
    low = lowpass_steady_state(pv, sample_rate, lpf)
    return low.mean(axis=-1), pv - low


def pv_split(pv: RealWaveform, lpf: LpfSpec = LpfSpec()):
    """Split a PV voltage into the harvested DC level and the information-bearing AC part."""
    dc, ac = pv_split_array(pv.samples, pv.sample_rate, lpf)
    return float(dc), RealWaveform(ac, pv.sample_rate)


def harvested_power(dc_level: float, load_resistance: float, efficiency: float) -> float:
    return efficiency * dc_level ** 2 / load_resistance


def harvest_step(store: EnergyStore, p_harvest: float, p_load: float, dt: float) -> EnergyStore:
    if dt <= 0:
        raise ValueError("dt must be positive")
    if p_harvest < 0 or p_load < 0:
        raise ValueError("powers must be non-negative")
    e = min(max(store.energy + (p_harvest - p_load) * dt, 0.0), store.capacity)
    v = min(np.sqrt(2.0 * e / store.capacitance), store.v_max)
    return replace(store, voltage=float(v))


def energy_neutral_margin(profile: PowerProfile, duty: Mapping[str, float], p_harvest: float) -> float:
    """Harvested minus duty-weighted consumed power; non-negative means sustainable."""
    total = sum(duty.values())
    if abs(total - 1.0) > 1e-9:
        raise ValueError(f"duty fractions sum to {total}, expected 1")
    return p_harvest - sum(frac * profile[state] for state, frac in duty.items())


def average_load(profile: PowerProfile, duty: Mapping[str, float]) -> float:
    return sum(frac * profile[state] for state, frac in duty.items())


def powered_trajectory(store: EnergyStore, p_harvest: float, p_load: float, dt: float, n_steps: int) -> np.ndarray:
    """Whether the device is above its operating threshold at the start of each step."""
    out = np.empty(n_steps, dtype=bool)
    for k in range(n_steps):
        out[k] = store.powered
        store = harvest_step(store, p_harvest, p_load, dt)
    return out
