import numpy as np
import pytest

from vlcambc.ambd import AmbdConfig, apply_reflection, eh_only_baseband
from vlcambc.bc_link import BcGeometry, RfSourceConfig, RxFrontEndConfig, backscatter_capture
from vlcambc.rx_demod import DemodConfig
from vlcambc.vlc_tx import FrameSpec, build_frame

GUARD = 200


def eh_capture(payload, rng=0, p_tx=0.0, d_rx=0.5, noise_floor_dbm=None, lead=GUARD, tail=GUARD, dp=None):
    """Single-capture EH-Only backscatter chain built from the public module API."""
    sw = eh_only_baseband(build_frame(FrameSpec(), payload), AmbdConfig())
    states = np.concatenate([np.zeros(lead, np.uint8), sw.states, np.zeros(tail, np.uint8)])
    refl = apply_reflection(type(sw)(states, sw.sample_rate))
    fe = RxFrontEndConfig(noise_floor_dbm=noise_floor_dbm, direct_path_gain=dp)
    return backscatter_capture(refl, RfSourceConfig(p_tx), BcGeometry(d_rx_bd=d_rx), fe, rng)


@pytest.fixture
def dcfg():
    return DemodConfig()


@pytest.fixture
def payload():
    return np.array([int(c) for c in "101100111000101101"], dtype=np.uint8)


# one PASS/FAIL line per acceptance criterion, printed after the run
ACCEPTANCE = {}


def record(n: int, ok: bool, detail: str):
    ACCEPTANCE[n] = (bool(ok), detail)
    print(f"criterion {n}: {'PASS' if ok else 'FAIL'} {detail}")
    return ok


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}")
