"""VLC downlink framing and intensity-modulated BFSK synthesis for the LED access point."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .sigcore import RealWaveform, as_generator

BARKER7 = np.array([1, 1, 1, 0, 0, 1, 0], dtype=np.uint8)
BARKER7_BIPOLAR = 2.0 * BARKER7 - 1.0

# Manchester table: bit 1 -> chips 10, bit 0 -> chips 01
_MANCHESTER = {1: (1, 0), 0: (0, 1)}


def as_bits(bits) -> np.ndarray:
    """Coerce a 0/1 sequence or a bit string like ``'1110010'`` to a uint8 array."""
    if isinstance(bits, str):
        bits = [int(c) for c in bits.replace(" ", "")]
    b = np.asarray(bits, dtype=np.int64)
    if b.size and not np.all((b == 0) | (b == 1)):
        raise ValueError("bits must be 0 or 1")
    return b.astype(np.uint8)


def bits_to_str(bits) -> str:
    return "".join(str(int(b)) for b in np.asarray(bits).ravel())


@dataclass(frozen=True)
class FrameSpec:
    payload_len: int = 18
    preamble: tuple = tuple(int(b) for b in BARKER7)

    def __post_init__(self):
        if tuple(self.preamble) != tuple(int(b) for b in BARKER7):
            raise ValueError("preamble must be the Barker-7 sequence 1110010")
        if self.payload_len < 1:
            raise ValueError("payload_len must be >= 1")

    @property
    def frame_len(self) -> int:
        return len(self.preamble) + self.payload_len


@dataclass(frozen=True)
class ChipStream:
    chips: np.ndarray
    chip_duration: float = 5e-4

    def __post_init__(self):
        c = as_bits(self.chips)
        if c.size % 2:
            raise ValueError("Manchester chip streams have even length")
        if not self.chip_duration > 0:
            raise ValueError("chip_duration must be positive")
        object.__setattr__(self, "chips", c)

    def __len__(self):
        return self.chips.size


@dataclass(frozen=True)
class VlcTxConfig:
    f0: float = 6000.0
    f1: float = 8000.0
    chip_duration: float = 5e-4
    sample_rate: float = 200e3
    optical_power_dc: float = 1.0
    modulation_index: float = 0.5

    def __post_init__(self):
        cycles = (self.f1 - self.f0) * self.chip_duration
        if cycles <= 0 or abs(cycles - round(cycles)) > 1e-9:
            raise ValueError("(f1 - f0) * chip_duration must be a positive integer for orthogonal tones")
        if min(self.f0, self.f1) <= 2000.0:
            raise ValueError("BFSK tones must stay above 2 kHz to avoid visible flicker")
        if max(self.f0, self.f1) >= self.sample_rate / 2:
            raise ValueError("BFSK tones must be below Nyquist")
        if not 0 < self.modulation_index <= 1:
            raise ValueError("modulation_index must lie in (0, 1]")
        if self.optical_power_dc <= 0:
            raise ValueError("optical_power_dc must be positive")
        spc = self.chip_duration * self.sample_rate
        if abs(spc - round(spc)) > 1e-9:
            raise ValueError("chip_duration * sample_rate must be a whole number of samples")

    @property
    def samples_per_chip(self) -> int:
        return int(round(self.chip_duration * self.sample_rate))


def prbs_payload(rng, length: int = 18) -> np.ndarray:
    if length < 1:
        raise ValueError("payload length must be >= 1")
    return as_generator(rng).integers(0, 2, size=length, dtype=np.uint8)


def build_frame(spec: FrameSpec, payload) -> np.ndarray:
    payload = as_bits(payload)
    if payload.size != spec.payload_len:
        raise ValueError(f"payload has {payload.size} bits, frame expects {spec.payload_len}")
    return np.concatenate([np.asarray(spec.preamble, dtype=np.uint8), payload])


def manchester_chips(bits: np.ndarray) -> np.ndarray:
    """Vectorised Manchester encoding over the last axis (``n`` bits -> ``2n`` chips)."""
    bits = np.asarray(bits, dtype=np.uint8)
    out = np.empty(bits.shape[:-1] + (2 * bits.shape[-1],), dtype=np.uint8)
    out[..., 0::2] = bits
    out[..., 1::2] = 1 - bits
    return out


def manchester_encode(bits, chip_duration: float = 5e-4) -> ChipStream:
    return ChipStream(manchester_chips(as_bits(bits)), chip_duration)


def fsk_cycles(chips: np.ndarray, f0: float, f1: float, samples_per_chip: int, sample_rate: float) -> np.ndarray:
    """Accumulated carrier phase, in cycles, of a phase-continuous BFSK chip sequence.

    Works on the last axis; returns ``chips.shape[-1] * samples_per_chip`` phase values,
    each the phase at the start of its sample.
    """
    chips = np.asarray(chips)
    step = np.where(chips == 1, f1, f0) / sample_rate  # cycles per sample within each chip
    per_sample = np.repeat(step, samples_per_chip, axis=-1)
    cyc = np.cumsum(per_sample, axis=-1) - per_sample
    return cyc


def bfsk_tone(chips: np.ndarray, cfg: VlcTxConfig) -> np.ndarray:
    """Unit-amplitude phase-continuous BFSK tone for a chip array (last axis = chips)."""
    cyc = fsk_cycles(chips, cfg.f0, cfg.f1, cfg.samples_per_chip, cfg.sample_rate)
    return np.sin(2 * np.pi * cyc)


def bfsk_intensity(chips, cfg: VlcTxConfig) -> RealWaveform:
    """Optical intensity ``P_dc * (1 + m * tone)`` of an IM/DD BFSK LED drive."""
    if isinstance(chips, ChipStream):
        if abs(chips.chip_duration - cfg.chip_duration) > 1e-15:
            raise ValueError("chip stream duration does not match the transmitter config")
        chips = chips.chips
    chips = as_bits(chips)
    if chips.size == 0:
        raise ValueError("cannot synthesise an empty chip stream")
    tone = bfsk_tone(chips, cfg)
    return RealWaveform(cfg.optical_power_dc * (1.0 + cfg.modulation_index * tone), cfg.sample_rate)


def barker_autocorrelation() -> np.ndarray:
    """Aperiodic autocorrelation of the bipolar Barker-7 code at lags -6..6."""
    return np.correlate(BARKER7_BIPOLAR, BARKER7_BIPOLAR, mode="full")
