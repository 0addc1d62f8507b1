"""Batched Monte-Carlo engine for the full VLC -> device -> backscatter -> receiver chain.

Random draws are keyed by (kind, frame index, purpose) only, so every grid point
of a device kind sees the same payloads, optical noise, carrier phases and RF
noise shapes (common random numbers).  Everything that depends on the RF
operating point (``d_rx_bd``, ``p_tx``) enters the capture linearly, which is
what lets one correlator bank per frame batch serve every RF point.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..ambd import (bandpass, comparator_hysteresis, match_command, pwm_states, quantize_reading,
                    reflection_array)
from ..bc_link import backscatter_amplitude, direct_path_gain
from ..energy import average_load, harvest_step, harvested_power, pv_split_array
from ..rx_demod import (MixtureBank, ToneBank, _rows, decode_batch, rss_from_span, snr_from_energies,
                        sync_batch, SNR_CAP_DB)
from ..sigcore import Rng, complex_normal, dbm_to_watts, watts_to_dbm
from ..vlc_channel import lambertian_gain, pv_voltage
from ..vlc_tx import BARKER7, bfsk_tone, manchester_chips
from .config import RunConfig

KIND_INDEX = {"eh": 0, "relay": 1, "control": 2}
STREAM_PAYLOAD, STREAM_VLC, STREAM_BC, STREAM_PHASE = range(4)

# duty fractions of each device over one frame
DUTY = {
    "eh": {"modulate": 1.0},
    "relay": {"modulate": 1.0},
    "control": {"decode": 0.5, "sense": 0.1, "modulate": 0.4},
}

# accumulator layout (one float vector per grid point)
ACC = ("n_frames", "n_detected", "bit_errors", "n_bits", "win", "lose", "rss_signal", "rss_noise",
       "inj_signal", "inj_noise", "sync_good", "vlc_errors", "vlc_bits", "powered")
IDX = {k: i for i, k in enumerate(ACC)}


def frame_generator(seed: int, kind: str, frame: int, stream: int) -> np.random.Generator:
    return Rng(seed, (KIND_INDEX[kind], frame, stream)).generator()


@dataclass
class Layout:
    guard: int
    frame_samples: int

    @property
    def n_samples(self):
        return self.frame_samples + 2 * self.guard


def layout(cfg: RunConfig) -> Layout:
    d = cfg.demod_cfg()
    return Layout(cfg.rx_guard_chips * d.samples_per_chip, d.frame_samples)


def _place(frames: np.ndarray, lay: Layout, fill=0):
    out = np.full((frames.shape[0], lay.n_samples), fill, dtype=frames.dtype)
    out[:, lay.guard:lay.guard + lay.frame_samples] = frames
    return out


def _frame_bits(payload: np.ndarray) -> np.ndarray:
    return np.concatenate([np.broadcast_to(BARKER7, (payload.shape[0], BARKER7.size)), payload], axis=1)


@dataclass
class DeviceBatch:
    payload: np.ndarray  # reference payload the receiver should recover (B, 18)
    states: np.ndarray  # switch states over the capture (B, L)
    powered: np.ndarray
    vlc_errors: int = 0
    vlc_bits: int = 0


def _codebook_array(cfg: RunConfig):
    return np.array([[int(c) for c in str(v)] for _, v in sorted(cfg.device_codebook.items())], dtype=np.uint8)


def downlink_payloads(cfg: RunConfig, kind: str, frames) -> np.ndarray:
    if kind == "control":
        book = _codebook_array(cfg)
        return book[np.asarray(frames) % len(book)]
    return np.stack([frame_generator(cfg.sweep_seed, kind, f, STREAM_PAYLOAD).integers(0, 2, 18, dtype=np.uint8)
                     for f in frames])


def simulate_devices(cfg: RunConfig, kind: str, d_led: float, frames, vlc_noise: bool = True) -> DeviceBatch:
    """Optical downlink, energy gate and device model for a batch of frames."""
    frames = list(frames)
    lay = layout(cfg)
    tx = cfg.tx_cfg()
    geom = cfg.vlc_geometry(d_led)
    fe = cfg.pv_front_end(kind)
    down = downlink_payloads(cfg, kind, frames)
    chips = manchester_chips(_frame_bits(down))
    fs = tx.sample_rate

    # the LED idles at its DC level during the guards
    tone = _place(bfsk_tone(chips, tx), lay, 0.0)
    intensity = tx.optical_power_dc * (1.0 + tx.modulation_index * tone)
    noise = None
    if vlc_noise and fe.electrical_noise_power > 0:
        noise = np.stack([frame_generator(cfg.sweep_seed, kind, f, STREAM_VLC).standard_normal(lay.n_samples)
                          for f in frames])
    pv = pv_voltage(intensity, geom, fe, noise)
    dc, ac = pv_split_array(pv, fs, cfg.lpf())

    store0 = cfg.store()
    p_load = average_load(cfg.profile(), DUTY[kind])
    powered = np.array([harvest_step(store0, harvested_power(max(float(v), 0.0), fe.load_resistance,
                                                             fe.conversion_efficiency),
                                     p_load, lay.n_samples / fs).powered for v in dc])

    dcfg = cfg.demod_cfg()
    vlc_errors = vlc_bits = 0
    if kind == "eh":
        payload = down
        states = _place(pwm_states(chips, tx), lay)
    elif kind == "relay":
        payload = down
        amp = tx.optical_power_dc * tx.modulation_index * lambertian_gain(geom) * fe.volts_per_watt
        if cfg.device_relay_band_hz:
            ac = bandpass(ac, fs, cfg.device_relay_band_hz, cfg.device_relay_filter_order)
        states = comparator_hysteresis(ac, 0.0, cfg.device_hysteresis_fraction * amp)
        # the relay's own chip decisions: its switching waveform read back as +/-1
        bits, det = _receive(ToneBank(1.0 - 2.0 * states, dcfg), dcfg)
        vlc_errors = int(np.sum(bits[det] != payload[det]) + 18 * np.sum(~det))
        vlc_bits = 18 * len(frames)
    else:
        book = cfg.ambd_cfg("control")
        bits, det = _receive(ToneBank(pv - pv.mean(axis=1, keepdims=True), dcfg), dcfg)
        cmds = [match_command(b, book) if ok else None for b, ok in zip(bits, det)]
        vlc_errors = int(np.sum(bits[det] != down[det]) + 18 * np.sum(~det))
        vlc_bits = 18 * len(frames)
        payload = np.stack([quantize_reading(book.sensor.read(f)) for f in frames])
        up = pwm_states(manchester_chips(_frame_bits(payload)), tx)
        states = _place(up, lay)
        states[np.array([c is None for c in cmds])] = 0
    states = np.where(powered[:, None], states, 0).astype(np.uint8)
    return DeviceBatch(payload, states, powered, vlc_errors, vlc_bits)


def _receive(bank, dcfg):
    starts = sync_batch(bank, dcfg)
    det = starts >= 0
    bits = np.zeros((starts.size, dcfg.payload_len), dtype=np.uint8)
    rows = np.flatnonzero(det)
    if rows.size:
        b, _, _ = decode_batch(_rows(bank, rows), starts[rows], dcfg)
        bits[rows] = b[:, len(BARKER7):]
    return bits, det


def rf_components(cfg: RunConfig, kind: str, frames, states: np.ndarray):
    """Unit backscatter component and unit noise for each frame, before scaling."""
    refl = cfg.reflection()
    gamma = reflection_array(states, refl)
    theta = np.array([frame_generator(cfg.sweep_seed, kind, f, STREAM_PHASE).uniform(0, 2 * np.pi, 2)
                      for f in frames])
    u = gamma * np.exp(1j * theta[:, :1])
    if cfg.bc_cfo_hz:
        n = np.arange(states.shape[1])
        u = u * np.exp(2j * np.pi * cfg.bc_cfo_hz * n / cfg.vlc_sample_rate_hz)
    w = np.stack([complex_normal(frame_generator(cfg.sweep_seed, kind, f, STREAM_BC), states.shape[1])
                  for f in frames])
    return u, w, theta[:, 1]


def _new_acc():
    return np.zeros(len(ACC))


def evaluate(bank, u_bank, dev: DeviceBatch, cfg: RunConfig, a, noise_std, timing: str = "sync",
             signal_energy=None) -> np.ndarray:
    """Receiver over one frame batch at one operating point; returns an accumulator vector."""
    dcfg = cfg.demod_cfg()
    lay = layout(cfg)
    n = dev.states.shape[0]
    acc = _new_acc()
    if timing == "genie":
        starts = np.full(n, lay.guard)
    else:
        starts = sync_batch(bank, dcfg)
    det = starts >= 0
    rows = np.flatnonzero(det)
    errors = 18 * (n - rows.size)
    if rows.size:
        bits, win, lose = decode_batch(_rows(bank, rows), starts[rows], dcfg)
        errors += int(np.sum(bits[:, len(BARKER7):] != dev.payload[rows]))
        acc[IDX["win"]] = win.sum()
        acc[IDX["lose"]] = lose.sum()
        acc[IDX["sync_good"]] = np.sum(np.abs(starts[rows] - lay.guard) <= dcfg.sync_step)
    # RSS over the detected frame span, or the whole capture without sync
    sig = noise = 0.0
    for mask, begin, length in ((det, np.where(det, starts, 0), lay.frame_samples),
                                (~det, np.zeros(n, dtype=np.int64), lay.n_samples)):
        if mask.any():
            s1, s2, sa = bank.span(begin, length)
            s, nn = rss_from_span(s1[mask], s2[mask], sa[mask], length)
            sig += s.sum()
            noise += nn.sum()
    if signal_energy is None:
        signal_energy = genie_signal_energy(u_bank, cfg)
    acc[IDX["n_frames"]] = n
    acc[IDX["n_detected"]] = rows.size
    acc[IDX["bit_errors"]] = errors
    acc[IDX["n_bits"]] = 18 * n
    acc[IDX["rss_signal"]] = sig
    acc[IDX["rss_noise"]] = noise
    acc[IDX["inj_signal"]] = np.sum(np.abs(a) ** 2 * signal_energy)
    acc[IDX["inj_noise"]] = np.sum(np.abs(noise_std) ** 2 * np.ones(n)) * dcfg.samples_per_chip
    acc[IDX["vlc_errors"]] = dev.vlc_errors
    acc[IDX["vlc_bits"]] = dev.vlc_bits
    acc[IDX["powered"]] = dev.powered.sum()
    return acc


def genie_signal_energy(u_bank, cfg: RunConfig) -> np.ndarray:
    """Mean winning bit energy of the noiseless unit backscatter component at the true timing."""
    dcfg = cfg.demod_cfg()
    starts = np.full(u_bank.batch, layout(cfg).guard)
    _, win, _ = decode_batch(u_bank, starts, dcfg)
    return win.mean(axis=1)


def run_batch(cfg: RunConfig, kind: str, d_led: float, frames, points, mode: str = "sweep",
              vlc_noise: bool = True):
    """Accumulators for ``points`` over one frame batch.

    ``mode`` is ``sweep`` (points are ``(d_rx, p_tx)``, link-budget scaling and
    sync) or ``waterfall`` (points are injected SNRs in dB, genie timing).
    """
    frames = list(frames)
    dev = simulate_devices(cfg, kind, d_led, frames, vlc_noise=vlc_noise)
    u, w, theta_dp = rf_components(cfg, kind, frames, dev.states)
    dcfg = cfg.demod_cfg()
    noise_w = cfg.rx_front_end().noise_power
    out = []
    if cfg.bc_cfo_hz and mode == "sweep":
        # the direct path is no longer constant; build each capture explicitly
        u_bank = ToneBank(u - u.mean(axis=1, keepdims=True), dcfg)
        s_u = genie_signal_energy(u_bank, cfg)
        n = np.arange(u.shape[1])
        rot = np.exp(2j * np.pi * cfg.bc_cfo_hz * n / cfg.vlc_sample_rate_hz)
        for d_rx, p_tx in points:
            g = cfg.bc_geometry(d_rx)
            a = float(backscatter_amplitude(p_tx, g))
            a_dp = float(np.sqrt(dbm_to_watts(p_tx) * direct_path_gain(g, cfg.rx_front_end())))
            y = a * u + a_dp * np.exp(1j * theta_dp)[:, None] * rot + np.sqrt(noise_w) * w
            bank = ToneBank(y - y.mean(axis=1, keepdims=True), dcfg)
            out.append(evaluate(bank, u_bank, dev, cfg, a, np.sqrt(noise_w), signal_energy=s_u))
        return out
    mix = MixtureBank(u - u.mean(axis=1, keepdims=True), w - w.mean(axis=1, keepdims=True), dcfg)
    s_u = genie_signal_energy(mix.u, cfg)
    for pt in points:
        if mode == "waterfall":
            gamma = 10 ** (pt / 10)
            a = np.ones(len(frames))
            b = np.sqrt(s_u / (gamma * dcfg.samples_per_chip))
            out.append(evaluate(mix.view(a, b), mix.u, dev, cfg, a, b, timing="genie", signal_energy=s_u))
        else:
            d_rx, p_tx = pt
            a = float(backscatter_amplitude(p_tx, cfg.bc_geometry(d_rx)))
            b = np.sqrt(noise_w)
            out.append(evaluate(mix.view(a, b), mix.u, dev, cfg, a, b, signal_energy=s_u))
    return out


def batches(cfg: RunConfig, n_frames: int | None = None):
    n = cfg.sweep_frames if n_frames is None else n_frames
    size = cfg.sweep_batch_frames
    return [range(s, min(s + size, n)) for s in range(0, n, size)]


@dataclass
class PointResult:
    kind: str
    d_led: float
    d_rx: float
    p_tx: float
    acc: np.ndarray

    def __getitem__(self, k):
        return self.acc[IDX[k]]

    @property
    def ber(self):
        return float(self["bit_errors"] / self["n_bits"])

    @property
    def vlc_ber(self):
        return float(self["vlc_errors"] / self["vlc_bits"]) if self["vlc_bits"] else float("nan")

    @property
    def frame_detect_rate(self):
        return float(self["n_detected"] / self["n_frames"])

    @property
    def snr_db(self):
        if self["n_detected"] == 0:
            return float("nan")
        return snr_from_energies(np.array([self["win"]]), np.array([self["lose"]]))

    @property
    def snr_db_injected(self):
        if self["inj_noise"] <= 0:
            return SNR_CAP_DB
        return float(min(10 * np.log10(self["inj_signal"] / self["inj_noise"]), SNR_CAP_DB))

    @property
    def rss_dbm(self):
        n = self["n_frames"]
        return float(watts_to_dbm(max(self["rss_signal"] / n, self["rss_noise"] / n, 1e-30)))
