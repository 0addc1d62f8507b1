"""Grid execution, CSV output with resume, and the report checks."""

from __future__ import annotations

import csv
import io
import os
import sys
from collections import defaultdict
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, fields

import numpy as np

from ..analysis import (MetricGrid, SensitivityReport, binomial_ci, loglog_slope, theory_ber_ncfsk,
                        theory_rss_curve)
from ..bc_link import link_budget_rss
from . import engine
from .config import RunConfig

CSV_HEADER = ("bd_kind", "d_led_bd_m", "d_rx_bd_m", "p_tx_dbm", "snr_db", "snr_db_injected", "ber",
              "frame_detect_rate", "rss_dbm", "rss_theory_dbm", "n_bits", "n_frames", "seed")
SCHEMA_VERSION = 1


@dataclass(frozen=True)
class MetricRecord:
    bd_kind: str
    d_led_bd_m: float
    d_rx_bd_m: float
    p_tx_dbm: float
    snr_db: float
    snr_db_injected: float
    ber: float
    frame_detect_rate: float
    rss_dbm: float
    rss_theory_dbm: float
    n_bits: int
    n_frames: int
    seed: int

    def to_row(self) -> list[str]:
        out = []
        for f in fields(self):
            v = getattr(self, f.name)
            out.append(repr(float(v)) if isinstance(v, float) else str(v))
        return out

    def as_dict(self):
        return {f.name: getattr(self, f.name) for f in fields(self)}


def record_from(cfg: RunConfig, res: engine.PointResult) -> MetricRecord:
    rss_theory = link_budget_rss(cfg.source(res.p_tx), cfg.bc_geometry(res.d_rx))
    return MetricRecord(res.kind, float(res.d_led), float(res.d_rx), float(res.p_tx), float(res.snr_db),
                        float(res.snr_db_injected), res.ber, res.frame_detect_rate, res.rss_dbm,
                        float(rss_theory), int(res["n_bits"]), int(res["n_frames"]), int(cfg.sweep_seed))


def failed_record(cfg: RunConfig, point) -> MetricRecord:
    kind, d_led, d_rx, p_tx = point
    nan = float("nan")
    return MetricRecord(kind, float(d_led), float(d_rx), float(p_tx), nan, nan, nan, nan, nan,
                        float(link_budget_rss(cfg.source(p_tx), cfg.bc_geometry(d_rx))), 0, 0, int(cfg.sweep_seed))


def _key(point):
    kind, d_led, d_rx, p_tx = point
    return (str(kind), round(float(d_led), 9), round(float(d_rx), 9), round(float(p_tx), 9))


def _task(args):
    cfg, kind, d_led, frames, pts, mode, vlc_noise = args
    try:
        return engine.run_batch(cfg, kind, d_led, frames, pts, mode=mode, vlc_noise=vlc_noise)
    except Exception as exc:  # reported per point by the caller
        return exc


def _map(tasks, workers: int):
    if workers <= 1 or len(tasks) <= 1:
        return [_task(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_task, tasks, chunksize=1))


def evaluate_points(cfg: RunConfig, points, workers: int | None = None, n_frames: int | None = None,
                    vlc_noise: bool = True):
    """Accumulated engine results for ``(kind, d_led, d_rx, p_tx)`` points.

    Work is split into (kind, d_led, frame batch) tasks whose batch boundaries
    do not depend on the worker count; results are reduced in task order, so
    the numbers are identical for any pool size.  Points whose task raised map
    to the exception instead of a result.
    """
    workers = cfg.sweep_workers if workers is None else workers
    groups = defaultdict(list)
    for p in dict.fromkeys(_key(p) for p in points):
        groups[(p[0], p[1])].append((p[2], p[3]))
    tasks, owners = [], []
    for (kind, d_led), pts in groups.items():
        for frames in engine.batches(cfg, n_frames):
            tasks.append((cfg, kind, d_led, frames, pts, "sweep", vlc_noise))
            owners.append((kind, d_led, pts))
    results = {}
    for (kind, d_led, pts), out in zip(owners, _map(tasks, workers)):
        for i, (d_rx, p_tx) in enumerate(pts):
            key = (kind, d_led, d_rx, p_tx)
            prev = results.get(key)
            if isinstance(prev, Exception):
                continue
            if isinstance(out, Exception):
                results[key] = out
            else:
                results[key] = out[i] if prev is None else prev + out[i]
    return {k: (v if isinstance(v, Exception) else engine.PointResult(*k, v)) for k, v in results.items()}


def run_point(cfg: RunConfig, kind: str, d_led: float, d_rx: float, p_tx: float, n_frames: int | None = None,
              vlc_noise: bool = True):
    """One grid cell; returns ``(MetricRecord, PointResult)``."""
    point = (kind, d_led, d_rx, p_tx)
    res = evaluate_points(cfg, [point], n_frames=n_frames, vlc_noise=vlc_noise)[_key(point)]
    if isinstance(res, Exception):
        print(f"point {point} failed: {res}", file=sys.stderr)
        return failed_record(cfg, point), None
    return record_from(cfg, res), res


def waterfall(cfg: RunConfig, kind: str, snr_db, n_frames: int, d_led: float | None = None,
              vlc_noise: bool = False, workers: int | None = None):
    """BER at injected decision SNRs with ideal timing; returns PointResults in ``snr_db`` order."""
    d_led = cfg.sweep_fixed_d_led_bd_m if d_led is None else d_led
    snr = [float(s) for s in snr_db]
    tasks = [(cfg, kind, d_led, frames, snr, "waterfall", vlc_noise) for frames in engine.batches(cfg, n_frames)]
    total = None
    for out in _map(tasks, cfg.sweep_workers if workers is None else workers):
        if isinstance(out, Exception):
            raise out
        total = out if total is None else [a + b for a, b in zip(total, out)]
    return [engine.PointResult(kind, d_led, float("nan"), s, acc) for s, acc in zip(snr, total)]


# ---------------------------------------------------------------- CSV

def write_csv(path, rows) -> None:
    tmp = f"{path}.tmp"
    with open(tmp, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_HEADER)
        w.writerows(rows)
    os.replace(tmp, path)


def read_csv(path) -> list[dict]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(header) != CSV_HEADER:
            raise ValueError(f"{path}: unexpected CSV header")
        return [dict(zip(CSV_HEADER, row)) for row in reader if row]


def run_sweep(cfg: RunConfig, out_path=None, resume: bool = False, workers: int | None = None):
    """Run the grid, write the CSV and return ``(MetricGrid, records)``.

    With ``resume`` existing rows of ``out_path`` are kept verbatim and only the
    missing cells are simulated.
    """
    points = cfg.sweep_points()
    done = {}
    if resume and out_path is not None and os.path.exists(out_path):
        for row in read_csv(out_path):
            key = _key((row["bd_kind"], row["d_led_bd_m"], row["d_rx_bd_m"], row["p_tx_dbm"]))
            done[key] = [row[c] for c in CSV_HEADER]
    todo = [p for p in points if _key(p) not in done]
    fresh = evaluate_points(cfg, todo, workers=workers) if todo else {}
    rows, records = [], []
    for p in points:
        k = _key(p)
        if k in done:
            row = done[k]
        else:
            res = fresh[k]
            if isinstance(res, Exception):
                print(f"point {p} failed: {res}", file=sys.stderr)
                rec = failed_record(cfg, p)
            else:
                rec = record_from(cfg, res)
            row = rec.to_row()
            done[k] = row
        rows.append(row)
        records.append(dict(zip(CSV_HEADER, row)))
    if out_path is not None:
        write_csv(out_path, rows)
    return MetricGrid.from_records(records), records


def csv_text(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    w.writerows(rows)
    return buf.getvalue()


# ---------------------------------------------------------------- report

@dataclass
class Check:
    name: str
    passed: bool
    detail: str

    def line(self) -> str:
        return f"[{'PASS' if self.passed else 'FAIL'}] {self.name}: {self.detail}"


def _num(rows, col):
    return np.array([float(r[col]) for r in rows])


def line_average(rows, axis_col, kind):
    """Mean BER over the power sweep at each value of one distance axis, with total bits."""
    acc = defaultdict(lambda: [0.0, 0])
    for r in rows:
        if r["bd_kind"] == kind:
            n = int(r["n_bits"])
            acc[float(r[axis_col])][0] += float(r["ber"]) * n
            acc[float(r[axis_col])][1] += n
    return {d: (e / n if n else float("nan"), n) for d, (e, n) in sorted(acc.items())}


def _line_rows(rows, kind, vary, fixed_col, fixed):
    return [r for r in rows if r["bd_kind"] == kind and abs(float(r[fixed_col]) - fixed) < 1e-9]


def monotone_within_ci(values, k: float = 3.0) -> bool:
    """Non-decreasing sequence of (rate, n), allowing drops covered by overlapping k-sigma intervals."""
    for (p0, n0), (p1, n1) in zip(values, values[1:]):
        if p1 < p0:
            s = np.sqrt(p0 * (1 - p0) / n0 + p1 * (1 - p1) / n1)
            if p0 - p1 > k * s:
                return False
    return True


def report_checks(rows, cfg: RunConfig | None = None) -> tuple[list[Check], SensitivityReport | None]:
    cfg = cfg or RunConfig()
    checks = []
    kinds = sorted({r["bd_kind"] for r in rows})
    if not rows:
        raise ValueError("CSV holds no rows")
    if any(not np.isfinite(float(r["ber"])) for r in rows):
        checks.append(Check("complete grid", False, "rows with failed points present"))

    # high-SNR cells of the local-data devices must agree with the BFSK law
    bad = []
    for r in rows:
        if r["bd_kind"] in ("eh", "control") and float(r["snr_db_injected"]) >= 14.0:
            n = int(r["n_bits"])
            p = theory_ber_ncfsk(10 ** (float(r["snr_db_injected"]) / 10))
            hi = max(binomial_ci(p, n)[1], 3.0 / n)
            if float(r["ber"]) > hi:
                bad.append(f"{r['bd_kind']}@({r['d_led_bd_m']},{r['d_rx_bd_m']},{r['p_tx_dbm']})")
    checks.append(Check("waterfall consistency (snr >= 14 dB)", not bad,
                        "all cells within 3-sigma of theory" if not bad else "outside: " + ", ".join(bad[:5])))

    for kind in kinds:
        kr = [r for r in rows if r["bd_kind"] == kind]
        p_top = max(float(r["p_tx_dbm"]) for r in kr)
        line = _line_rows(kr, kind, "d_rx_bd_m", "d_led_bd_m", cfg.sweep_fixed_d_led_bd_m)
        top = sorted([r for r in line if float(r["p_tx_dbm"]) == p_top], key=lambda r: float(r["d_rx_bd_m"]))
        if len(top) >= 2:
            d, rss, th = _num(top, "d_rx_bd_m"), _num(top, "rss_dbm"), _num(top, "rss_theory_dbm")
            slope = loglog_slope(d, rss)
            checks.append(Check(f"{kind} RSS slope", abs(slope + 20) <= 0.5, f"{slope:.3f} dB/decade at {p_top:g} dBm"))
            dev = float(np.max(np.abs(rss - th)))
            checks.append(Check(f"{kind} RSS vs link budget", dev <= 0.1, f"max |delta| {dev:.4f} dB at {p_top:g} dBm"))

        led = line_average(_line_rows(kr, kind, "d_led_bd_m", "d_rx_bd_m", cfg.sweep_fixed_d_rx_bd_m), "d_led_bd_m", kind)
        if len(led) >= 2:
            floor = 1.0 / min(n for _, n in led.values())
            vals = [max(b, floor) for b, _ in led.values()]
            ratio = max(vals) / min(vals)
            checks.append(Check(f"{kind} BER stable over d_led", ratio < 10.0, f"max/min {ratio:.3g}"))
        rx = line_average(line, "d_rx_bd_m", kind)
        if len(rx) >= 2:
            seq = list(rx.values())
            strict = all(b1 >= b0 for (b0, _), (b1, _) in zip(seq, seq[1:]))
            ok = strict or monotone_within_ci(seq)
            checks.append(Check(f"{kind} BER non-decreasing in d_rx", ok,
                                " ".join(f"{b:.3g}" for b, _ in seq) + ("" if strict else " (within CI)")))

    rep = None
    try:
        rep = SensitivityReport.from_grid(MetricGrid.from_records(rows))
    except ValueError as exc:
        checks.append(Check("sensitivity", False, str(exc)))
    if rep is not None:
        for kind in kinds:
            v, b = rep.rows[(kind, "ber")]
            if kind == "relay":
                checks.append(Check("relay BER sensitivity VLC-dominant", v > 0.5, f"vlc {v:.3f} bc {b:.3f}"))
            else:
                checks.append(Check(f"{kind} BER sensitivity BC-dominant", b > 0.5, f"vlc {v:.3f} bc {b:.3f}"))
            v, b = rep.rows[(kind, "rss")]
            checks.append(Check(f"{kind} RSS sensitivity BC-dominant", b > 0.9, f"vlc {v:.3f} bc {b:.3f}"))
    return checks, rep


def theory_text(cfg: RunConfig) -> str:
    out = io.StringIO()
    out.write("snr_db,ber_theory\n")
    for s in range(0, 13, 2):
        out.write(f"{s},{theory_ber_ncfsk(10 ** (s / 10))!r}\n")
    out.write("\nd_rx_bd_m,p_tx_dbm,rss_theory_dbm\n")
    for p in cfg.sweep_p_tx_dbm:
        geoms = [cfg.bc_geometry(d) for d in cfg.sweep_d_rx_bd_m]
        for d, rss in theory_rss_curve(cfg.source(p), geoms):
            out.write(f"{d!r},{p!r},{rss!r}\n")
    return out.getvalue()


def report(csv_path=None, cfg: RunConfig | None = None, stream=None) -> bool:
    """Print checks and the sensitivity table; ``True`` when every check passes."""
    cfg = cfg or RunConfig()
    stream = stream or sys.stdout
    if csv_path is None:
        stream.write(theory_text(cfg))
        return True
    checks, rep = report_checks(read_csv(csv_path), cfg)
    for c in checks:
        stream.write(c.line() + "\n")
    if rep is not None:
        stream.write("\n" + rep.table() + "\n")
    return all(c.passed for c in checks)
