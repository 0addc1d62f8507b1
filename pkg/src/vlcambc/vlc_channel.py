"""Line-of-sight Lambertian optical channel and photovoltaic front-end."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .sigcore import RealWaveform, as_generator


@dataclass(frozen=True)
class VlcGeometry:
    d_led_bd: float = 0.3
    emit_angle: float = 0.0
    incidence_angle: float = 0.0
    lambertian_order: float = 1.0
    detector_area: float = 1e-4
    fov_half_angle: float = np.pi / 2 - 1e-9

    def __post_init__(self):
        if self.d_led_bd <= 0:
            raise ValueError("d_led_bd must be positive")
        if self.detector_area <= 0:
            raise ValueError("detector_area must be positive")
        if self.lambertian_order < 1:
            raise ValueError("lambertian_order must be >= 1")
        for name in ("emit_angle", "incidence_angle", "fov_half_angle"):
            a = getattr(self, name)
            if not 0 <= a < np.pi / 2:
                raise ValueError(f"{name} must lie in [0, pi/2)")


@dataclass(frozen=True)
class PvFrontEnd:
    """PV cell seen as a photodiode into a load.

    ``electrical_noise_power`` is the per-sample variance (V^2) of the AWGN at
    the PV output and lumps shot and thermal noise together.
    """

    responsivity: float = 0.5
    load_resistance: float = 1000.0
    conversion_efficiency: float = 0.9
    electrical_noise_power: float = 0.0

    def __post_init__(self):
        if self.responsivity <= 0:
            raise ValueError("responsivity must be positive")
        if not 0 < self.conversion_efficiency <= 1:
            raise ValueError("conversion_efficiency must lie in (0, 1]")
        if self.load_resistance <= 0:
            raise ValueError("load_resistance must be positive")
        if self.electrical_noise_power < 0:
            raise ValueError("electrical_noise_power must be non-negative")

    @property
    def volts_per_watt(self) -> float:
        return self.responsivity * self.load_resistance


def lambertian_gain(g: VlcGeometry) -> float:
    """LOS DC gain ``(m+1) A cos^m(phi) cos(psi) / (2 pi d^2)``; zero outside the field of view."""
    if g.incidence_angle > g.fov_half_angle:
        return 0.0
    m = g.lambertian_order
    return ((m + 1) * g.detector_area * np.cos(g.emit_angle) ** m * np.cos(g.incidence_angle)
            / (2 * np.pi * g.d_led_bd ** 2))


def pv_voltage(optical: np.ndarray, g: VlcGeometry, fe: PvFrontEnd, noise: np.ndarray | None = None) -> np.ndarray:
    """Array form of :func:`propagate_vlc`; ``noise`` is unit-variance Gaussian of the same shape."""
    v = optical * (lambertian_gain(g) * fe.volts_per_watt)
    if noise is not None and fe.electrical_noise_power > 0:
        v = v + np.sqrt(fe.electrical_noise_power) * noise
    return v


def propagate_vlc(tx: RealWaveform, g: VlcGeometry, fe: PvFrontEnd, rng=None) -> RealWaveform:
    if np.any(tx.samples < 0):
        raise ValueError("optical intensity cannot be negative")
    noise = None
    if fe.electrical_noise_power > 0:
        noise = as_generator(rng if rng is not None else 0).standard_normal(len(tx))
    return RealWaveform(pv_voltage(tx.samples, g, fe, noise), tx.sample_rate)
