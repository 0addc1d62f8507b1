"""Closed-form baselines and distance-sensitivity analysis over simulated metric grids."""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass, field

import numpy as np

from .bc_link import BcGeometry, RfSourceConfig, link_budget_rss

BER_FLOOR = 1e-6
METRICS = ("ber", "rss")
AXES = ("vlc", "bc")


def theory_ber_ncfsk(gamma_linear):
    """Non-coherent orthogonal BFSK bit error rate ``0.5 exp(-gamma/2)``."""
    g = np.asarray(gamma_linear, dtype=float)
    if np.any(g < 0) or np.any(np.isnan(g)):
        raise ValueError("SNR must be non-negative")
    out = 0.5 * np.exp(-g / 2)
    return float(out) if out.ndim == 0 else out


def binomial_ci(p: float, n: int, k: float = 3.0):
    """``p -/+ k sigma`` of a binomial proportion over ``n`` trials, clipped to [0, 1]."""
    s = np.sqrt(p * (1 - p) / n)
    return max(0.0, p - k * s), min(1.0, p + k * s)


def theory_rss_curve(src: RfSourceConfig, geometries) -> list[tuple[float, float]]:
    """``(d_rx_bd, dBm)`` of the link budget over a sequence of geometries (or d_rx values)."""
    out = []
    for g in geometries:
        if not isinstance(g, BcGeometry):
            g = BcGeometry(d_rx_bd=float(g))
        out.append((g.d_rx_bd, link_budget_rss(src, g)))
    return out


def loglog_slope(d, rss_db) -> float:
    """Least-squares slope of RSS (dB) against log10(distance), in dB/decade."""
    return float(np.polyfit(np.log10(np.asarray(d, float)), np.asarray(rss_db, float), 1)[0])


@dataclass
class MetricGrid:
    """Aggregated metrics keyed by ``(kind, d_led_bd, d_rx_bd, p_tx_dbm)``.

    Cells map to dicts holding at least ``ber``, ``rss`` and ``n_bits``.
    """

    cells: dict = field(default_factory=dict)

    def add(self, kind, d_led, d_rx, p_tx, **values):
        self.cells[(kind, round(float(d_led), 9), round(float(d_rx), 9), float(p_tx))] = values

    @classmethod
    def from_records(cls, records):
        g = cls()
        for r in records:
            g.add(r["bd_kind"], r["d_led_bd_m"], r["d_rx_bd_m"], r["p_tx_dbm"],
                  ber=float(r["ber"]), rss=float(r["rss_dbm"]), n_bits=int(r["n_bits"]),
                  rss_theory=float(r["rss_theory_dbm"]))
        return g

    @property
    def kinds(self):
        return sorted({k[0] for k in self.cells})

    def axis_values(self, kind, axis: int):
        return sorted({k[axis] for k in self.cells if k[0] == kind})

    def lines(self, kind, axis: str):
        """Cells grouped into lines along one distance axis with the other coordinates fixed."""
        vary = 1 if axis == "vlc" else 2
        groups = defaultdict(list)
        for key, val in self.cells.items():
            if key[0] != kind:
                continue
            rest = tuple(key[i] for i in (1, 2, 3) if i != vary)
            groups[rest].append((key[vary], val))
        return [sorted(v, key=lambda t: t[0]) for v in groups.values() if len(v) >= 2]

    def line(self, kind, axis: str, fixed: float, p_tx=None):
        """Cells along ``axis`` with the other distance at ``fixed``; optionally one power."""
        vary, other = (1, 2) if axis == "vlc" else (2, 1)
        out = defaultdict(list)
        for key, val in self.cells.items():
            if key[0] == kind and abs(key[other] - fixed) < 1e-9 and (p_tx is None or key[3] == p_tx):
                out[key[vary]].append(val)
        return dict(sorted(out.items()))


def _metric_value(cell, metric):
    if metric == "ber":
        return np.log10(max(cell["ber"], BER_FLOOR))
    return cell["rss"]


def axis_sensitivity(grid: MetricGrid, metric: str, kind, axis: str) -> float:
    """Mean ``|delta metric|`` per cm along ``axis``, averaged over every line of the grid."""
    if metric not in METRICS:
        raise ValueError(f"metric must be one of {METRICS}")
    lines = grid.lines(kind, axis)
    if not lines:
        raise ValueError(f"grid has no line along the {axis} axis for {kind}")
    slopes = []
    for line in lines:
        d = np.array([p[0] for p in line]) * 100.0
        m = np.array([_metric_value(p[1], metric) for p in line])
        slopes.extend(np.abs(np.diff(m)) / np.diff(d))
    return float(np.mean(slopes))


def normalize_pair(a: float, b: float) -> tuple[float, float]:
    s = a + b
    if s <= 0:
        return 0.5, 0.5
    return a / s, b / s


def sensitivity(grid: MetricGrid, metric: str, kind) -> tuple[float, float]:
    """Normalised ``(vlc, bc)`` sensitivity of one metric for one device kind."""
    return normalize_pair(axis_sensitivity(grid, metric, kind, "vlc"),
                          axis_sensitivity(grid, metric, kind, "bc"))


@dataclass
class SensitivityReport:
    rows: dict = field(default_factory=dict)  # (kind, metric) -> (vlc, bc)

    @classmethod
    def from_grid(cls, grid: MetricGrid):
        rep = cls()
        for kind in grid.kinds:
            for metric in METRICS:
                rep.rows[(kind, metric)] = sensitivity(grid, metric, kind)
        return rep

    def table(self) -> str:
        lines = ["kind      metric  vlc_axis  bc_axis"]
        for (kind, metric), (v, b) in sorted(self.rows.items()):
            lines.append(f"{kind:<9} {metric:<7} {v:8.4f}  {b:7.4f}")
        return "\n".join(lines)
