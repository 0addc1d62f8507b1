"""Behavioural models of the three ambient backscatter devices.

Every model ends in a :class:`SwitchWaveform`, the open/short sequence that
drives the antenna termination.  EH-Only and VLC-Control generate it from local
bits with a 50 % duty PWM whose frequency follows the BFSK chips; VLC-Relay
slices the AC part of the photovoltaic voltage with a hysteresis comparator, so
whatever the optical link delivered (errors included) is what gets reflected.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .energy import EnergyStore
from .sigcore import ComplexWaveform, RealWaveform
from .vlc_tx import FrameSpec, VlcTxConfig, as_bits, build_frame, fsk_cycles, manchester_chips

OPEN, SHORT = 0, 1
PAYLOAD_BITS = 18


class AmbdKind(str, enum.Enum):
    EH_ONLY = "eh"
    VLC_RELAY = "relay"
    VLC_CONTROL = "control"


@dataclass(frozen=True)
class SensorModel:
    """Deterministic sensor: reading ``k`` is ``(base + k*step) mod 2**bits``."""

    base: int = 0x15A2B
    step: int = 0
    bits: int = PAYLOAD_BITS

    def read(self, k: int = 0) -> int:
        return (self.base + k * self.step) % (1 << self.bits)


def quantize_reading(value: int, bits: int = PAYLOAD_BITS) -> np.ndarray:
    """MSB-first binary representation of an integer sensor code."""
    if not 0 <= value < (1 << bits):
        raise ValueError(f"sensor code {value} does not fit in {bits} bits")
    return np.array([(value >> (bits - 1 - i)) & 1 for i in range(bits)], dtype=np.uint8)


def _default_codebook():
    return {1: "101100111000101101", 2: "010011000111010010", 3: "111100001111000011"}


@dataclass(frozen=True)
class AmbdConfig:
    kind: AmbdKind = AmbdKind.EH_ONLY
    tx_cfg: VlcTxConfig = VlcTxConfig()
    comparator_threshold: float = 0.0
    comparator_hysteresis: float | None = None  # None: hysteresis_fraction of the AC amplitude
    hysteresis_fraction: float = 0.1
    relay_band: tuple | None = None  # (low, high) Hz of the amplifier ahead of the comparator
    relay_filter_order: int = 2
    duty: float = 0.5
    command_codebook: Mapping[int, str] = field(default_factory=_default_codebook)
    sensor: SensorModel = SensorModel()

    def __post_init__(self):
        object.__setattr__(self, "kind", AmbdKind(self.kind))
        if self.duty != 0.5:
            raise ValueError("the device PWM runs at a fixed 50% duty cycle")
        if self.comparator_hysteresis is not None and self.comparator_hysteresis < 0:
            raise ValueError("hysteresis must be non-negative")
        if self.hysteresis_fraction < 0:
            raise ValueError("hysteresis_fraction must be non-negative")
        book = {int(k): as_bits(v) for k, v in self.command_codebook.items()}
        pats = [tuple(v) for v in book.values()]
        if any(len(p) != PAYLOAD_BITS for p in pats):
            raise ValueError(f"codebook patterns must be {PAYLOAD_BITS} bits")
        if len(set(pats)) != len(pats):
            raise ValueError("codebook patterns must be distinct")


@dataclass(frozen=True)
class SwitchWaveform:
    states: np.ndarray  # 0 = open, 1 = short
    sample_rate: float

    def __post_init__(self):
        s = np.asarray(self.states)
        if s.ndim != 1:
            raise ValueError("states must be 1-D")
        if s.size and not np.all((s == OPEN) | (s == SHORT)):
            raise ValueError("switch states must be binary")
        if not self.sample_rate > 0:
            raise ValueError("sample_rate must be positive")
        s = s.astype(np.uint8)
        s.setflags(write=False)
        object.__setattr__(self, "states", s)

    def __len__(self):
        return self.states.size


@dataclass(frozen=True)
class ReflectionPair:
    gamma_open: complex = 1.0 + 0j
    gamma_short: complex = -1.0 + 0j

    def __post_init__(self):
        if abs(self.gamma_open) > 1 or abs(self.gamma_short) > 1:
            raise ValueError("reflection coefficients must satisfy |gamma| <= 1")

    @property
    def mod_factor(self) -> float:
        return abs(self.gamma_open - self.gamma_short) ** 2 / 4


def pwm_states(chips: np.ndarray, cfg: VlcTxConfig) -> np.ndarray:
    """50 % duty square wave per chip at f0 / f1; last axis is chips, output is samples.

    The antenna is shorted during the first half of every PWM period; the
    period count runs on continuously across chip boundaries.
    """
    cyc = fsk_cycles(chips, cfg.f0, cfg.f1, cfg.samples_per_chip, cfg.sample_rate)
    return (np.mod(cyc + 1e-9, 1.0) < 0.5).astype(np.uint8)


def eh_only_baseband(frame_bits, cfg: AmbdConfig) -> SwitchWaveform:
    chips = manchester_chips(as_bits(frame_bits))
    return SwitchWaveform(pwm_states(chips, cfg.tx_cfg), cfg.tx_cfg.sample_rate)


def comparator_hysteresis(ac: np.ndarray, threshold: float, hysteresis) -> np.ndarray:
    """Schmitt trigger over the last axis: short above ``threshold + h/2``, open below ``threshold - h/2``.

    Inside the dead band the previous state is held; the initial state is open.
    ``hysteresis`` may be a scalar or broadcast over the leading axes.
    """
    ac = np.asarray(ac, dtype=float)
    half = 0.5 * np.asarray(hysteresis, dtype=float)
    if half.ndim:
        half = half[..., None]
    hi = ac > threshold + half
    lo = ac < threshold - half
    decided = hi | lo
    # forward-fill the last decided sample
    n = ac.shape[-1]
    idx = np.where(decided, np.arange(n), -1)
    np.maximum.accumulate(idx, axis=-1, out=idx)
    state = np.take_along_axis(hi, np.maximum(idx, 0), axis=-1)
    return np.where(idx >= 0, state, False).astype(np.uint8)


def bandpass(x: np.ndarray, sample_rate: float, band, order: int = 2) -> np.ndarray:
    """Linear-phase amplifier response over the last axis.

    Magnitude of an ``order``-pole high-pass at ``band[0]`` cascaded with an
    ``order``-pole low-pass at ``band[1]``, applied without phase shift; a real
    amplifier adds a constant group delay on top, which frame sync absorbs.
    """
    lo, hi = band
    if not 0 < lo < hi:
        raise ValueError("band edges must satisfy 0 < low < high")
    n = x.shape[-1]
    f = np.fft.rfftfreq(n, d=1.0 / sample_rate)
    r_lo, r_hi = (f / lo) ** 2, (f / hi) ** 2
    h = (r_lo / (1.0 + r_lo)) ** (order / 2) * (1.0 + r_hi) ** (-order / 2)
    return np.fft.irfft(np.fft.rfft(x, axis=-1) * h, n=n, axis=-1)


def relay_baseband(ac: RealWaveform, cfg: AmbdConfig, expected_amplitude: float | None = None) -> SwitchWaveform:
    """Comparator-sliced PV AC component used directly as the switching waveform."""
    x = ac.samples
    if cfg.relay_band:
        x = bandpass(x, ac.sample_rate, cfg.relay_band, cfg.relay_filter_order)
    h = cfg.comparator_hysteresis
    if h is None:
        amp = np.sqrt(2.0) * x.std() if expected_amplitude is None else expected_amplitude
        h = cfg.hysteresis_fraction * amp
    return SwitchWaveform(comparator_hysteresis(x, cfg.comparator_threshold, h), ac.sample_rate)


def _demod_cfg(cfg: AmbdConfig):
    from .rx_demod import DemodConfig
    t = cfg.tx_cfg
    return DemodConfig(f0=t.f0, f1=t.f1, chip_duration=t.chip_duration, sample_rate=t.sample_rate,
                       payload_len=PAYLOAD_BITS)


def match_command(payload, cfg: AmbdConfig):
    """Exact codebook lookup of an 18-bit payload."""
    if payload is None:
        return None
    p = tuple(as_bits(payload))
    for cmd, pattern in cfg.command_codebook.items():
        if tuple(as_bits(pattern)) == p:
            return int(cmd)
    return None


def control_decode(pv: RealWaveform, cfg: AmbdConfig):
    """Decode a downlink command from the PV waveform; ``None`` without sync or exact match."""
    from .rx_demod import demodulate
    res = demodulate(pv.samples, _demod_cfg(cfg))
    return match_command(res.payload, cfg)


def sensor_payload(cfg: AmbdConfig, k: int = 0) -> np.ndarray:
    return quantize_reading(cfg.sensor.read(k), PAYLOAD_BITS)


def control_respond(cmd, cfg: AmbdConfig, k: int = 0) -> SwitchWaveform:
    """Sense, quantise to 18 bits, frame and backscatter the reading."""
    if cmd is None or int(cmd) not in {int(c) for c in cfg.command_codebook}:
        raise ValueError(f"unknown command {cmd!r}")
    frame = build_frame(FrameSpec(PAYLOAD_BITS), sensor_payload(cfg, k))
    return eh_only_baseband(frame, cfg)


def reflection_array(states: np.ndarray, refl: ReflectionPair) -> np.ndarray:
    return np.where(np.asarray(states) == SHORT, refl.gamma_short, refl.gamma_open).astype(complex)


def apply_reflection(sw: SwitchWaveform, refl: ReflectionPair = ReflectionPair()) -> ComplexWaveform:
    return ComplexWaveform(reflection_array(sw.states, refl), sw.sample_rate)


def gate_powered(sw: SwitchWaveform, store: EnergyStore) -> SwitchWaveform:
    """An unpowered device leaves its antenna open."""
    if store.powered:
        return sw
    return SwitchWaveform(np.zeros(len(sw), dtype=np.uint8), sw.sample_rate)
