"""Quick invariant suite behind ``vlc-ambc selftest``.

Each check is cheap (the whole suite runs in a few seconds) and exercises one
link of the chain end to end against a closed-form value.
"""

from __future__ import annotations

import numpy as np

from ..analysis import theory_ber_ncfsk
from ..bc_link import BcGeometry, RfSourceConfig, link_budget_rss
from ..energy import supercap_bank
from ..rx_demod import manchester_decode
from ..vlc_tx import barker_autocorrelation, manchester_chips
from .config import RunConfig
from .sweep import Check, run_point


def _theory():
    got = (theory_ber_ncfsk(1.0), theory_ber_ncfsk(10.0))
    ok = abs(got[0] - 0.30327) < 1e-5 and abs(got[1] - 3.369e-3) < 1e-6
    return Check("ber theory at 0 and 10 dB", ok, f"{got[0]:.5f} {got[1]:.4e}")


def _budget():
    rss = link_budget_rss(RfSourceConfig(0.0), BcGeometry(0.5, 0.5, wavelength=0.125))
    return Check("link budget worked value", abs(rss + 68.05) < 0.01, f"{rss:.3f} dBm")


def _codec(seed):
    g = np.random.default_rng(seed)
    bits = g.integers(0, 2, (1000, 25), dtype=np.uint8)
    bad = sum(not np.array_equal(manchester_decode(manchester_chips(b)), b) for b in bits)
    return Check("manchester round trip", bad == 0, f"{bad} of 1000 frames differ")


def _barker():
    ac = barker_autocorrelation()
    side = np.abs(np.delete(ac, len(ac) // 2)).max()
    return Check("barker autocorrelation", ac.max() == 7 and side <= 1, f"peak {ac.max()} sidelobe {side}")


def _store():
    s = supercap_bank()
    usable = 0.5 * s.capacitance * (s.v_max ** 2 - s.v_min_operate ** 2)
    return Check("supercap usable energy", abs(usable - 1.53) < 1e-9, f"{usable:.3f} J")


def _chain(cfg: RunConfig, kind: str):
    quiet = cfg.replace(bc_noise_floor_dbm=None, **{f"vlc_noise_{kind}_v2": 0.0})
    d_rx = cfg.sweep_fixed_d_rx_bd_m
    rec, res = run_point(quiet, kind, cfg.sweep_fixed_d_led_bd_m, d_rx, 0.0, n_frames=20)
    budget = link_budget_rss(quiet.source(0.0), quiet.bc_geometry(d_rx))
    ok = res is not None and res.ber == 0 and abs(res.rss_dbm - budget) < 0.05
    detail = "point failed" if res is None else f"ber {res.ber} rss {res.rss_dbm:.3f} vs {budget:.3f}"
    return Check(f"noiseless {kind} chain", ok, detail)


def _repeat(cfg: RunConfig):
    a, _ = run_point(cfg, "relay", 0.3, 0.5, 0.0, n_frames=10)
    b, _ = run_point(cfg, "relay", 0.3, 0.5, 0.0, n_frames=10)
    same = a.to_row() == b.to_row()
    return Check("repeatable point", same, "rows identical" if same else "rows differ")


def run_selftest(cfg: RunConfig | None = None) -> list[Check]:
    cfg = cfg or RunConfig()
    checks = [_theory(), _budget(), _codec(cfg.sweep_seed), _barker(), _store()]
    checks += [_chain(cfg, k) for k in cfg.sweep_kinds]
    checks.append(_repeat(cfg))
    return checks
