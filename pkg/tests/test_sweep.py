import csv

import pytest

from vlcambc.harness import sweep
from vlcambc.harness.config import RunConfig

SMALL = RunConfig(sweep_kinds=("eh", "relay"), sweep_d_led_bd_m=(0.2, 0.4), sweep_d_rx_bd_m=(0.3, 0.6),
                  sweep_p_tx_dbm=(-10.0, 0.0), sweep_fixed_d_led_bd_m=0.2, sweep_fixed_d_rx_bd_m=0.3,
                  sweep_frames=40, sweep_batch_frames=20)


@pytest.fixture(scope="module")
def small_csv(tmp_path_factory):
    path = tmp_path_factory.mktemp("sw") / "grid.csv"
    sweep.run_sweep(SMALL, path)
    return path


def test_csv_schema_and_order(small_csv):
    with open(small_csv, newline="") as fh:
        rows = list(csv.reader(fh))
    assert tuple(rows[0]) == sweep.CSV_HEADER
    keys = [(r[0], float(r[1]), float(r[2]), float(r[3])) for r in rows[1:]]
    assert keys == SMALL.sweep_points()
    for r in rows[1:]:
        assert int(r[10]) == 18 * int(r[11]) == 720
        assert int(r[12]) == SMALL.sweep_seed


def test_resume_rebuilds_identical_file(small_csv, tmp_path):
    full = small_csv.read_bytes()
    part = tmp_path / "part.csv"
    part.write_bytes(b"".join(full.splitlines(keepends=True)[:4]))
    sweep.run_sweep(SMALL, part, resume=True)
    assert part.read_bytes() == full


def test_worker_count_does_not_change_output(small_csv, tmp_path):
    other = tmp_path / "w2.csv"
    sweep.run_sweep(SMALL, other, workers=2)
    assert other.read_bytes() == small_csv.read_bytes()


def _check(checks, name):
    return next(c for c in checks if c.name == name)


def test_tampered_rss_is_caught(small_csv, tmp_path):
    rows = sweep.read_csv(small_csv)
    checks, _ = sweep.report_checks(rows, SMALL)
    assert _check(checks, "eh RSS vs link budget").passed
    victim = next(r for r in rows if r["bd_kind"] == "eh" and r["d_rx_bd_m"] == "0.6" and r["p_tx_dbm"] == "0.0")
    victim["rss_dbm"] = repr(float(victim["rss_dbm"]) + 1.0)
    checks, _ = sweep.report_checks(rows, SMALL)
    assert not _check(checks, "eh RSS vs link budget").passed
    bad = tmp_path / "bad.csv"
    sweep.write_csv(bad, [[r[c] for c in sweep.CSV_HEADER] for r in rows])
    assert sweep.report(bad, SMALL, stream=open(tmp_path / "log", "w")) is False


def test_failed_point_is_flagged(small_csv):
    rows = sweep.read_csv(small_csv)
    rows[0]["ber"] = "nan"
    checks, _ = sweep.report_checks(rows, SMALL)
    assert not _check(checks, "complete grid").passed


def test_read_csv_rejects_wrong_header(tmp_path):
    p = tmp_path / "x.csv"
    p.write_text("a,b\n1,2\n")
    with pytest.raises(ValueError):
        sweep.read_csv(p)


def test_run_point_record():
    rec, res = sweep.run_point(SMALL, "eh", 0.2, 0.3, 0.0, n_frames=20)
    assert rec.n_frames == 20 and rec.ber == res.ber == 0.0
    assert rec.frame_detect_rate == 1.0
    assert abs(rec.rss_dbm - rec.rss_theory_dbm) < 0.1


def test_waterfall_recovers_injected_snr():
    res = sweep.waterfall(SMALL, "eh", [4.0, 10.0], 100)
    assert [r.snr_db_injected for r in res] == pytest.approx([4.0, 10.0], abs=1e-9)
    assert res[0].ber > res[1].ber


def test_monotone_within_ci():
    assert sweep.monotone_within_ci([(0.1, 1000), (0.2, 1000)])
    assert sweep.monotone_within_ci([(0.1, 100), (0.09, 100)])
    assert not sweep.monotone_within_ci([(0.5, 10000), (0.1, 10000)])


def test_theory_text_lists_curves():
    text = sweep.theory_text(SMALL)
    assert "\n0,0.3032653298563167\n" in text
    # header, seven SNR rows, blank line, header, d_rx x p_tx rows
    assert text.count("\n") == 1 + 7 + 1 + 1 + 2 * 2


def test_report_is_not_circular():
    # one line with a hand-made rising RSS must fail the slope check
    rows = []
    for d, r in ((0.3, -50.0), (0.6, -40.0)):
        rows.append(dict(zip(sweep.CSV_HEADER, ["eh", "0.2", repr(d), "0.0", "20.0", "20.0", "0.0", "1.0",
                                                repr(r), repr(r), "720", "40", "1"])))
    checks, _ = sweep.report_checks(rows, SMALL)
    assert not _check(checks, "eh RSS slope").passed


def test_snr_estimator_calibration():
    # data-driven estimate against the injected 10 dB over 1000 frames
    res = sweep.waterfall(SMALL, "eh", [10.0], 1000)[0]
    assert res.snr_db == pytest.approx(10.0, abs=0.5)
