"""Backscatter receiver: direct-path removal, non-coherent BFSK detection, Barker sync,
Manchester decoding and SNR / RSS / BER metrics.

Detection uses real sinusoidal chip templates.  Because the backscatter
reflection stream is real-valued, its sidebands at +f and -f carry the same
data with a known relative phase; correlating the complex capture against the
real template adds both images in amplitude, and only the channel phase is left
unknown.  A Manchester bit spans two chips whose template phases are known, so
the default bit decision correlates over both chips at once (``symbol``
detector), which is an orthogonal binary non-coherent test with error rate
``0.5*exp(-snr/2)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .sigcore import ComplexWaveform, RealWaveform, watts_to_dbm
from .vlc_tx import BARKER7, BARKER7_BIPOLAR, as_bits

SNR_CAP_DB = 60.0
_TINY_W = 1e-30


@dataclass(frozen=True)
class DemodConfig:
    f0: float = 6000.0
    f1: float = 8000.0
    chip_duration: float = 5e-4
    sample_rate: float = 200e3
    payload_len: int = 18
    sync_threshold: int = 6
    sync_gate_db: float = 3.0
    bit_detector: str = "symbol"
    frame_gate_db: float | None = 5.0  # decision SNR over the whole frame required to accept a sync

    def __post_init__(self):
        if not 4 <= self.sync_threshold <= 7:
            raise ValueError("sync_threshold must lie in [4, 7]")
        if self.bit_detector not in ("symbol", "chip"):
            raise ValueError("bit_detector must be 'symbol' or 'chip'")
        spc = self.chip_duration * self.sample_rate
        if abs(spc - round(spc)) > 1e-9:
            raise ValueError("chip_duration * sample_rate must be a whole number of samples")
        for f in (self.f0, self.f1):
            cyc = f * self.chip_duration
            if abs(cyc - round(cyc)) > 1e-9:
                raise ValueError("each tone must complete a whole number of cycles per chip")
        if self.payload_len < 1:
            raise ValueError("payload_len must be >= 1")

    @property
    def samples_per_chip(self) -> int:
        return int(round(self.chip_duration * self.sample_rate))

    @property
    def frame_bits(self) -> int:
        return len(BARKER7) + self.payload_len

    @property
    def frame_samples(self) -> int:
        return 2 * self.frame_bits * self.samples_per_chip

    @property
    def sync_step(self) -> int:
        return max(1, self.samples_per_chip // 4)


@dataclass
class DemodResult:
    payload: np.ndarray | None
    chip_energies: np.ndarray
    snr_db: float
    rss_dbm: float
    sync_offset: int | None


def _gather(arr, offsets, rows=slice(None)):
    if isinstance(rows, slice):
        return np.take_along_axis(arr[rows], offsets, axis=1)
    return arr[np.asarray(rows)[:, None], offsets]


def _windows(arr, offsets, width, rows=slice(None)):
    """``arr[row, offset:offset + width]`` for every (row, offset) pair -> (R, K, width)."""
    sw = np.lib.stride_tricks.sliding_window_view(arr, width, axis=1)
    if isinstance(rows, slice):
        rows = np.arange(arr.shape[0])[rows]
    return sw[np.asarray(rows)[:, None], offsets]


def _prefix(x: np.ndarray) -> np.ndarray:
    out = np.zeros(x.shape[:-1] + (x.shape[-1] + 1,), dtype=x.dtype)
    np.cumsum(x, axis=-1, out=out[..., 1:])
    return out


class ToneBank:
    """Sliding chip-length template correlators for a batch of captures.

    ``corr[i][b, o] = sum_n y[b, o + n] * sin(2 pi f_i n / fs)`` for every start
    offset ``o``; also keeps running sums for span power statistics.
    """

    def __init__(self, y, cfg: DemodConfig):
        y = np.asarray(y)
        if y.ndim == 1:
            y = y[None, :]
        y = y.astype(complex, copy=False)
        self.cfg = cfg
        self.batch, self.n_samples = y.shape
        n_chip = cfg.samples_per_chip
        n = np.arange(self.n_samples)
        self.corr = []
        if self.n_samples >= n_chip:
            o = np.arange(self.n_samples - n_chip + 1)
            for f in (cfg.f0, cfg.f1):
                w = 2 * np.pi * f / cfg.sample_rate
                ps = _prefix(y * np.sin(w * n))
                pc = _prefix(y * np.cos(w * n))
                self.corr.append(np.cos(w * o) * (ps[:, o + n_chip] - ps[:, o])
                                 - np.sin(w * o) * (pc[:, o + n_chip] - pc[:, o]))
        self.p1 = _prefix(y)
        self.p2 = _prefix(y * y)
        self.pa = _prefix((y * y.conj()).real)

    def chip(self, offsets: np.ndarray, tone: int) -> np.ndarray:
        return np.take_along_axis(self.corr[tone], offsets, axis=1)

    def window(self, offsets, tone, width, rows=slice(None)):
        return _windows(self.corr[tone], offsets, width, rows)

    def decimated(self, tone: int, step: int) -> np.ndarray:
        """Correlators at offsets ``0, step, 2*step, ...`` (cached)."""
        cache = self.__dict__.setdefault("_dec", {})
        if (tone, step) not in cache:
            cache[tone, step] = np.ascontiguousarray(self.corr[tone][:, ::step])
        return cache[tone, step]

    def span(self, start: np.ndarray, length: int):
        start = np.asarray(start)[:, None]
        s1 = np.take_along_axis(self.p1, start + length, 1) - np.take_along_axis(self.p1, start, 1)
        s2 = np.take_along_axis(self.p2, start + length, 1) - np.take_along_axis(self.p2, start, 1)
        sa = np.take_along_axis(self.pa, start + length, 1) - np.take_along_axis(self.pa, start, 1)
        return s1[:, 0], s2[:, 0], sa[:, 0]


class MixtureBank:
    """Correlators of ``y = a*u + b*v`` for per-frame weights, built once from the parts.

    Every receiver statistic is either linear in the capture (template
    correlations) or quadratic through span sums, so a new signal-to-noise mix
    costs a weighted sum instead of a fresh pass over the samples.
    """

    def __init__(self, u, v, cfg: DemodConfig):
        self.u = ToneBank(u, cfg)
        self.v = ToneBank(v, cfg)
        u = self.u_raw = np.atleast_2d(u).astype(complex, copy=False)
        v = np.atleast_2d(v).astype(complex, copy=False)
        self.p_uv = _prefix(u * v)
        self.p_ucv = _prefix(u * v.conj())
        self.cfg = cfg
        self.batch, self.n_samples = self.u.batch, self.u.n_samples

    def view(self, a, b) -> "MixtureView":
        return MixtureView(self, np.broadcast_to(np.asarray(a, dtype=complex), (self.batch,)),
                           np.broadcast_to(np.asarray(b, dtype=complex), (self.batch,)))


class MixtureView:
    def __init__(self, mix: MixtureBank, a, b):
        self.mix, self.a, self.b = mix, a, b
        self.cfg = mix.cfg
        self.batch, self.n_samples = mix.batch, mix.n_samples

    def window(self, offsets, tone, width, rows=slice(None)):
        m = self.mix
        zu = _windows(m.u.corr[tone], offsets, width, rows)
        zv = _windows(m.v.corr[tone], offsets, width, rows)
        return self.a[rows, None, None] * zu + self.b[rows, None, None] * zv

    def decimated(self, tone: int, step: int) -> np.ndarray:
        m = self.mix
        return self.a[:, None] * m.u.decimated(tone, step) + self.b[:, None] * m.v.decimated(tone, step)

    def subset(self, rows) -> "_RowView":
        return _RowView(self, rows)

    def chip(self, offsets, tone, rows=slice(None)):
        m = self.mix
        zu = _gather(m.u.corr[tone], offsets, rows)
        zv = _gather(m.v.corr[tone], offsets, rows)
        return self.a[rows, None] * zu + self.b[rows, None] * zv

    def span(self, start, length, rows=slice(None)):
        m = self.mix
        st = np.asarray(start)[:, None]

        def d(p):
            p = p[rows]
            return (np.take_along_axis(p, st + length, 1) - np.take_along_axis(p, st, 1))[:, 0]

        a, b = self.a[rows], self.b[rows]
        s1 = a * d(m.u.p1) + b * d(m.v.p1)
        s2 = a * a * d(m.u.p2) + 2 * a * b * d(m.p_uv) + b * b * d(m.v.p2)
        sa = (abs(a) ** 2 * d(m.u.pa).real + abs(b) ** 2 * d(m.v.pa).real
              + 2 * (a * b.conj() * d(m.p_ucv)).real)
        return s1, s2, sa


class _RowView:
    def __init__(self, view, rows):
        self.view, self.rows = view, rows
        self.cfg = view.cfg
        self.n_samples = view.n_samples

    def chip(self, offsets, tone):
        return self.view.chip(offsets, tone, rows=self.rows)

    def window(self, offsets, tone, width):
        return self.view.window(offsets, tone, width, rows=self.rows)


def _rows(bank, rows):
    if isinstance(bank, MixtureView):
        return bank.subset(rows)
    return _BankRows(bank, rows)


class _BankRows:
    def __init__(self, bank: ToneBank, rows):
        self.bank, self.rows = bank, rows
        self.cfg = bank.cfg
        self.n_samples = bank.n_samples

    def chip(self, offsets, tone):
        return _gather(self.bank.corr[tone], offsets, self.rows)

    def window(self, offsets, tone, width):
        return _windows(self.bank.corr[tone], offsets, width, self.rows)


def bit_correlations(bank, starts: np.ndarray, n_bits: int):
    """Template correlations for ``n_bits`` Manchester bits from each start offset.

    ``starts`` has shape (B, K); returns four (B, K, n_bits) arrays
    ``(z0a, z1a, z0b, z1b)``: tone-0/tone-1 correlations of the first and second chip.
    """
    n_chip = bank.cfg.samples_per_chip
    starts = np.asarray(starts)
    k = np.arange(n_bits) * 2 * n_chip
    off_a = (starts[..., None] + k).reshape(starts.shape[0], -1)
    off_b = off_a + n_chip
    shape = starts.shape + (n_bits,)
    return tuple(bank.chip(off, t).reshape(shape) for off, t in ((off_a, 0), (off_a, 1), (off_b, 0), (off_b, 1)))


def window_energies(bank, lo: np.ndarray, width: int, n_bits: int, detector: str = "symbol"):
    """Bit energies for starts ``lo + 0 .. lo + width - 1`` of each row -> (R, width, n_bits)."""
    n_chip = bank.cfg.samples_per_chip
    off_a = np.asarray(lo)[:, None] + np.arange(n_bits) * 2 * n_chip
    z = [bank.window(off, t, width).transpose(0, 2, 1)
         for off, t in ((off_a, 0), (off_a, 1), (off_a + n_chip, 0), (off_a + n_chip, 1))]
    return _energies(*z, detector)


def bit_energies(bank, starts, n_bits: int, detector: str = "symbol"):
    """Decision energies ``(e0, e1)`` for bit 0 (chips 01) and bit 1 (chips 10)."""
    return _energies(*bit_correlations(bank, starts, n_bits), detector)


def _energies(z0a, z1a, z0b, z1b, detector):
    if detector == "symbol":
        return np.abs(z0a + z1b) ** 2, np.abs(z1a + z0b) ** 2
    return np.abs(z0a) ** 2 + np.abs(z1b) ** 2, np.abs(z1a) ** 2 + np.abs(z0b) ** 2


def _preamble_scores(e0, e1):
    dec = e1 > e0
    matches = np.sum(dec == BARKER7.astype(bool), axis=-1)
    win = np.where(dec, e1, e0).sum(axis=-1)
    lose = np.where(dec, e0, e1).sum(axis=-1)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(lose > 0, (win - lose) / lose, np.inf)
    ratio = np.where(win > 0, ratio, 0.0)
    soft = np.sum(BARKER7_BIPOLAR * (e1 - e0), axis=-1)
    return matches, ratio, soft


def sync_batch(bank, cfg: DemodConfig, threshold: int | None = None) -> np.ndarray:
    """Barker frame synchronisation for every capture in a bank; -1 marks no sync.

    Coarse hypotheses every quarter chip must reach ``threshold`` of 7 preamble
    decisions and a preamble SNR of ``sync_gate_db``; the first qualifying one
    is refined to the sample that maximises the soft Barker correlation.
    """
    thr = cfg.sync_threshold if threshold is None else threshold
    gate = 10 ** (cfg.sync_gate_db / 10)
    n_chip, step = cfg.samples_per_chip, cfg.sync_step
    last = bank.n_samples - cfg.frame_samples
    batch = bank.batch
    out = np.full(batch, -1, dtype=np.int64)
    if last < 0:
        return out
    coarse = np.arange(0, last + 1, step)
    if n_chip % step == 0 and hasattr(bank, "decimated"):
        # every coarse chip window starts on the decimated grid
        c = n_chip // step
        ja = np.arange(coarse.size)[:, None] + 2 * c * np.arange(7)
        d0, d1 = bank.decimated(0, step), bank.decimated(1, step)
        e0, e1 = _energies(d0[:, ja], d1[:, ja], d0[:, ja + c], d1[:, ja + c], cfg.bit_detector)
    else:
        e0, e1 = bit_energies(bank, np.broadcast_to(coarse, (batch, coarse.size)), 7, cfg.bit_detector)
    matches, ratio, soft = _preamble_scores(e0, e1)
    ok = (matches >= thr) & (ratio >= gate)
    c = max(1, n_chip // step)
    width = 2 * step + 1
    pending = ok.any(axis=1)
    for r in range(coarse.size):
        rows = np.flatnonzero(pending)
        if rows.size == 0:
            break
        okr = ok[rows]
        # r-th qualifying coarse hypothesis, then the best soft score within one chip after it
        idx = np.argmax(np.cumsum(okr, axis=1) > r, axis=1)
        near = idx[:, None] + np.arange(c + 1)
        near_soft = np.where(near < coarse.size, soft[rows[:, None], np.minimum(near, coarse.size - 1)], -np.inf)
        o = coarse[np.take_along_axis(near, np.argmax(near_soft, axis=1)[:, None], 1)[:, 0]]
        lo = np.clip(o - step, 0, max(last - 2 * step, 0))
        w = min(width, last + 1)
        f0, f1 = window_energies(_rows(bank, rows), lo, w, 7, cfg.bit_detector)
        m, q, fs = _preamble_scores(f0, f1)
        best = np.argmax(fs, axis=1)
        take = np.arange(rows.size)
        good = (m[take, best] >= thr) & (q[take, best] >= gate)
        if cfg.frame_gate_db is not None:
            g0, g1 = bit_energies(_rows(bank, rows), (lo + best)[:, None], cfg.frame_bits, cfg.bit_detector)
            win = np.maximum(g0, g1)[:, 0].sum(axis=1)
            lose = np.minimum(g0, g1)[:, 0].sum(axis=1)
            with np.errstate(divide="ignore", invalid="ignore"):
                good &= (win - lose) >= 10 ** (cfg.frame_gate_db / 10) * lose
        out[rows[good]] = (lo + best)[good]
        pending[rows[good]] = False
        pending[rows[~good]] = okr[~good].sum(axis=1) > r + 1
    return out


def decode_batch(bank, starts: np.ndarray, cfg: DemodConfig):
    """Bits and winning/losing energies of full frames at the given starts (must be valid)."""
    e0, e1 = bit_energies(bank, np.asarray(starts)[:, None], cfg.frame_bits, cfg.bit_detector)
    e0, e1 = e0[:, 0], e1[:, 0]
    if cfg.bit_detector == "chip":
        bits = _manchester_bits_from_chips(bank, starts, cfg)
    else:
        bits = (e1 > e0).astype(np.uint8)
    win = np.where(bits == 1, e1, e0)
    lose = np.where(bits == 1, e0, e1)
    return bits, win, lose


def _manchester_bits_from_chips(bank, starts, cfg):
    z0a, z1a, z0b, z1b = bit_correlations(bank, np.asarray(starts)[:, None], cfg.frame_bits)
    e = [np.abs(z)[:, 0] ** 2 for z in (z0a, z1a, z0b, z1b)]
    chips = np.stack([e[1] > e[0], e[3] > e[2]], axis=-1).astype(np.uint8)
    return _manchester_pairs(chips, e[0], e[1], e[2], e[3])


def _manchester_pairs(pairs, e0a, e1a, e0b, e1b):
    first, second = pairs[..., 0], pairs[..., 1]
    valid = first != second
    # invalid pairs: compare total energy of the two legal chip patterns
    soft = (e1a + e0b) > (e0a + e1b)
    return np.where(valid, first, soft).astype(np.uint8)


def snr_from_energies(win: np.ndarray, lose: np.ndarray) -> float:
    """Pooled ``(mean win - mean lose) / mean lose`` in dB, capped at 60 dB."""
    w, l = float(np.sum(win)), float(np.sum(lose))
    if w <= 0:
        return float("nan")
    if l <= 0 or (w - l) / l >= 10 ** (SNR_CAP_DB / 10):
        return SNR_CAP_DB
    if w <= l:
        return -np.inf
    return float(10 * np.log10((w - l) / l))


def rss_from_span(s1, s2, sa, n: int):
    """Backscatter and noise power (W) of a span from its running sums.

    The reflection stream swings along one line in the complex plane, so the
    component orthogonal to that line is noise only: ``|mean z^2|`` estimates
    the sideband power and ``mean|z|^2`` minus it the noise.
    """
    zz = s2 - s1 * s1 / n
    za = sa - np.abs(s1) ** 2 / n
    total = np.maximum(za.real / n, 0.0)
    signal = np.minimum(np.abs(zz) / n, total)
    noise = total - signal
    return signal, noise


# ---------------------------------------------------------------- single-capture API

def _samples(y):
    return y.samples if isinstance(y, (ComplexWaveform, RealWaveform)) else np.asarray(y)


def remove_direct_path(y: ComplexWaveform) -> ComplexWaveform:
    """Subtract the complex mean (static carrier leakage) of the capture."""
    return ComplexWaveform(y.samples - y.samples.mean(), y.sample_rate, y.center_frequency)


def fsk_chip_detect(y, cfg: DemodConfig, frame_start: int, n_chips: int | None = None) -> np.ndarray:
    """Per-chip decisions with soft energies.

    Returns an ``(n_chips, 3)`` array of ``(decision, E0, E1)``; energies are
    ``|template correlation|^2 / samples_per_chip``.  Ties decide chip 0.
    """
    n_chip = cfg.samples_per_chip
    n_chips = 2 * cfg.frame_bits if n_chips is None else n_chips
    x = _samples(y)
    if frame_start < 0 or frame_start + n_chips * n_chip > x.size:
        raise IndexError("frame span lies outside the capture")
    bank = ToneBank(x, cfg)
    offs = (frame_start + np.arange(n_chips) * n_chip)[None, :]
    e0 = np.abs(bank.chip(offs, 0)[0]) ** 2 / n_chip
    e1 = np.abs(bank.chip(offs, 1)[0]) ** 2 / n_chip
    return np.column_stack([(e1 > e0).astype(float), e0, e1])


def sync_barker(y, cfg: DemodConfig, threshold: int | None = None) -> int | None:
    x = _samples(y)
    if x.size < cfg.frame_samples:
        return None
    off = int(sync_batch(ToneBank(x - x.mean(), cfg), cfg, threshold)[0])
    return None if off < 0 else off


def manchester_decode(chips, energies=None) -> np.ndarray:
    """Invert the 1->10 / 0->01 Manchester table.

    Invalid pairs (00, 11) are resolved with ``energies`` (an (n, 2) array of
    per-chip E0, E1) by picking the bit whose legal pattern holds more energy;
    without energies they decode as 0.
    """
    c = as_bits(chips)
    if c.size % 2:
        raise ValueError("Manchester chip stream must have even length")
    pairs = c.reshape(-1, 2)
    if energies is None:
        z = np.zeros(pairs.shape[0])
        return _manchester_pairs(pairs, z, z, z, z)
    e = np.asarray(energies, dtype=float).reshape(-1, 2, 2)
    return _manchester_pairs(pairs, e[:, 0, 0], e[:, 0, 1], e[:, 1, 0], e[:, 1, 1])


def measure_snr(y, cfg: DemodConfig, frame_start: int) -> float:
    """Data-driven decision SNR over a located frame (dB, capped at 60)."""
    if frame_start is None:
        raise ValueError("no frame located")
    x = _samples(y)
    if frame_start < 0 or frame_start + cfg.frame_samples > x.size:
        raise IndexError("frame span lies outside the capture")
    bank = ToneBank(x - x.mean(), cfg)
    _, win, lose = decode_batch(bank, np.array([frame_start]), cfg)
    return snr_from_energies(win, lose)


def measure_rss(y, span: tuple[int, int] | None = None) -> float:
    """Backscatter RSS in dBm, clamped at the estimated noise power."""
    x = _samples(y).astype(complex)
    if span is not None:
        x = x[span[0]:span[0] + span[1]]
    n = x.size
    sig, noise = rss_from_span(np.array([x.sum()]), np.array([(x * x).sum()]),
                               np.array([np.vdot(x, x).real]), n)
    return float(watts_to_dbm(max(sig[0], noise[0], _TINY_W)))


def ber(reference, decoded, payload_len: int | None = None) -> float:
    """Hamming distance over length; a missing decode (``None``) counts every bit wrong."""
    ref = as_bits(reference)
    if decoded is None:
        return 1.0
    dec = as_bits(decoded)
    if dec.size != ref.size:
        raise ValueError("reference and decoded bit vectors differ in length")
    if ref.size == 0:
        return 0.0
    return float(np.count_nonzero(ref != dec) / ref.size)


def demodulate(y, cfg: DemodConfig) -> DemodResult:
    """Full receive chain on one capture."""
    x = _samples(y).astype(complex)
    x = x - x.mean()
    bank = ToneBank(x, cfg)
    start = int(sync_batch(bank, cfg)[0]) if x.size >= cfg.frame_samples else -1
    if start < 0:
        sig, noise = rss_from_span(*bank.span(np.array([0]), x.size), x.size)
        return DemodResult(None, np.empty((0, 2)), float("nan"),
                           float(watts_to_dbm(max(sig[0], noise[0], _TINY_W))), None)
    bits, win, lose = decode_batch(bank, np.array([start]), cfg)
    det = fsk_chip_detect(x, cfg, start)
    sig, noise = rss_from_span(*bank.span(np.array([start]), cfg.frame_samples), cfg.frame_samples)
    return DemodResult(bits[0, len(BARKER7):], det[:, 1:], snr_from_energies(win, lose),
                       float(watts_to_dbm(max(sig[0], noise[0], _TINY_W))), start)
