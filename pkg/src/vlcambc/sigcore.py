"""Signal containers, tone synthesis, noise injection and tone-energy measurement.

Waveforms are thin immutable wrappers around numpy arrays.  Most of the
numerical routines in the package operate on plain arrays whose last axis is
time so that a batch of frames can be processed at once; the wrappers carry the
sample rate around for the single-waveform API.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

#: Bit generator used for every stochastic operation (numpy PCG64, numpy >= 1.17 stream).
RNG_ALGORITHM = "PCG64"


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class RealWaveform:
    samples: np.ndarray
    sample_rate: float

    def __post_init__(self):
        s = np.asarray(self.samples, dtype=float)
        if s.ndim != 1 or s.size < 1:
            raise ValueError("RealWaveform needs a non-empty 1-D sample array")
        if not self.sample_rate > 0:
            raise ValueError("sample_rate must be positive")
        if not np.all(np.isfinite(s)):
            raise ValueError("waveform samples must be finite")
        object.__setattr__(self, "samples", _frozen(s))

    def __len__(self):
        return self.samples.size

    @property
    def duration(self) -> float:
        return self.samples.size / self.sample_rate


@dataclass(frozen=True)
class ComplexWaveform:
    """Complex baseband samples (sqrt-watt scale) around ``center_frequency``."""

    samples: np.ndarray
    sample_rate: float
    center_frequency: float = 0.0

    def __post_init__(self):
        s = np.asarray(self.samples, dtype=complex)
        if s.ndim != 1:
            raise ValueError("ComplexWaveform needs a 1-D sample array")
        if not self.sample_rate > 0:
            raise ValueError("sample_rate must be positive")
        if not np.all(np.isfinite(s)):
            raise ValueError("waveform samples must be finite")
        object.__setattr__(self, "samples", _frozen(s))

    def __len__(self):
        return self.samples.size


@dataclass(frozen=True)
class Rng:
    """Seeded deterministic generator.

    ``stream`` gives independent sub-streams of the same seed; the harness keys
    them by device kind, frame index and purpose.
    """

    seed: int
    stream: tuple = ()
    algorithm: str = field(default=RNG_ALGORITHM, init=False)

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(entropy=int(self.seed) & (2**64 - 1), spawn_key=tuple(self.stream))
        return np.random.Generator(np.random.PCG64(ss))

    def child(self, *key: int) -> "Rng":
        return Rng(self.seed, tuple(self.stream) + tuple(int(k) for k in key))


def as_generator(rng) -> np.random.Generator:
    if isinstance(rng, Rng):
        return rng.generator()
    if isinstance(rng, np.random.Generator):
        return rng
    return Rng(int(rng)).generator()


def make_tone(freq: float, duration: float, sample_rate: float, phase: float = 0.0) -> RealWaveform:
    """Unit-amplitude sine ``sin(2*pi*freq*n/fs + phase)``."""
    if not duration > 0:
        raise ValueError("duration must be positive")
    if not 0 < freq < sample_rate / 2:
        raise ValueError(f"tone frequency {freq} Hz must lie in (0, Nyquist)")
    n = np.arange(int(round(duration * sample_rate)))
    if n.size == 0:
        raise ValueError("duration shorter than one sample")
    return RealWaveform(np.sin(2 * np.pi * freq * n / sample_rate + phase), sample_rate)


def add_awgn(w, noise_power: float, rng):
    """Add white Gaussian noise of per-sample variance ``noise_power``.

    Complex waveforms get circularly-symmetric noise (``noise_power/2`` per
    quadrature).  Zero noise returns the input object unchanged.
    """
    if noise_power < 0:
        raise ValueError("noise_power must be non-negative")
    if noise_power == 0:
        return w
    g = as_generator(rng)
    n = len(w)
    if isinstance(w, ComplexWaveform):
        noise = np.sqrt(noise_power / 2) * (g.standard_normal(n) + 1j * g.standard_normal(n))
        return ComplexWaveform(w.samples + noise, w.sample_rate, w.center_frequency)
    if isinstance(w, RealWaveform):
        return RealWaveform(w.samples + np.sqrt(noise_power) * g.standard_normal(n), w.sample_rate)
    raise TypeError("add_awgn expects a RealWaveform or ComplexWaveform")


def complex_normal(g: np.random.Generator, shape) -> np.ndarray:
    """Unit-power circular complex Gaussian samples."""
    return (g.standard_normal(shape) + 1j * g.standard_normal(shape)) * np.sqrt(0.5)


def tone_energy(w, freq: float, start: int, length: int) -> float:
    """Single-bin DFT energy ``|sum w[n] exp(-j 2 pi f n / fs)|^2 / length`` over a window."""
    x = w.samples
    if length < 1 or start < 0 or start + length > x.size:
        raise IndexError(f"window [{start}, {start + length}) outside waveform of {x.size} samples")
    if abs(freq) >= w.sample_rate / 2:
        raise ValueError("frequency must be below Nyquist")
    n = np.arange(length)
    z = np.dot(x[start:start + length], np.exp(-2j * np.pi * freq * n / w.sample_rate))
    return float(abs(z) ** 2 / length)


def db(x):
    return 10.0 * np.log10(x)


def undb(x):
    return 10.0 ** (np.asarray(x) / 10.0)


def dbm_to_watts(p_dbm):
    return 10.0 ** ((np.asarray(p_dbm, dtype=float) - 30.0) / 10.0)


def watts_to_dbm(p_w):
    return 10.0 * np.log10(p_w) + 30.0
