"""Run configuration: one flat dataclass, loadable from a YAML file of dotted keys.

A config file looks like::

    vlc.f0_hz: 6000
    bc.noise_floor_dbm: -80
    sweep.d_rx_bd_m: [0.1, 0.3, 0.5]
    device.codebook: {1: "101100111000101101"}

Nested mappings (``vlc: {f0_hz: 6000}``) are flattened to the same keys.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

import numpy as np
import yaml

from ..ambd import AmbdConfig, AmbdKind, ReflectionPair, SensorModel
from ..bc_link import BcGeometry, RxFrontEndConfig, RfSourceConfig
from ..energy import EnergyStore, LpfSpec, PowerProfile
from ..rx_demod import DemodConfig
from ..vlc_channel import PvFrontEnd, VlcGeometry
from ..vlc_tx import VlcTxConfig

KINDS = ("eh", "relay", "control")


def _codebook():
    return {1: "101100111000101101", 2: "010011000111010010", 3: "111100001111000011"}


@dataclass(frozen=True)
class RunConfig:
    # sweep
    sweep_d_led_bd_m: tuple = (0.2, 0.3, 0.4, 0.5)
    sweep_d_rx_bd_m: tuple = (0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9)
    sweep_p_tx_dbm: tuple = tuple(float(p) for p in range(-25, 30, 5))
    sweep_fixed_d_led_bd_m: float = 0.3
    sweep_fixed_d_rx_bd_m: float = 0.5
    sweep_fixed_p_tx_dbm: float = 0.0
    sweep_kinds: tuple = KINDS
    sweep_frames: int = 4000
    sweep_batch_frames: int = 100
    sweep_seed: int = 20240611
    sweep_workers: int = 1
    # optical downlink
    vlc_f0_hz: float = 6000.0
    vlc_f1_hz: float = 8000.0
    vlc_chip_duration_s: float = 5e-4
    vlc_sample_rate_hz: float = 200e3
    vlc_optical_power_w: float = 1.0
    vlc_modulation_index: float = 0.5
    vlc_lambertian_order: float = 1.0
    vlc_detector_area_m2: float = 1e-4
    vlc_emit_angle_rad: float = 0.0
    vlc_incidence_angle_rad: float = 0.0
    vlc_responsivity_a_per_w: float = 0.5
    vlc_load_ohm: float = 1000.0
    vlc_conversion_efficiency: float = 0.9
    # PV front-end noise variance (V^2) per device kind
    vlc_noise_eh_v2: float = 1e-5
    vlc_noise_relay_v2: float = 2e-3
    vlc_noise_control_v2: float = 1e-5
    # energy
    energy_cells: int = 4
    energy_cell_capacitance_f: float = 0.1
    energy_topology: str = "parallel"
    energy_v_init: float = 3.0
    energy_v_max: float = 3.3
    energy_v_min_operate: float = 1.8
    energy_lpf_cutoff_hz: float = 100.0
    energy_p_sleep_w: float = 1e-6
    energy_p_decode_w: float = 100e-6
    energy_p_sense_w: float = 500e-6
    energy_p_modulate_w: float = 50e-6
    # device
    device_gamma_open: float = 1.0
    device_gamma_short: float = -1.0
    device_hysteresis_fraction: float = 0.1
    device_relay_band_hz: tuple | None = (5000.0, 9000.0)  # amplifier pass band ahead of the comparator
    device_relay_filter_order: int = 2
    device_sensor_base: int = 0x15A2B
    device_sensor_step: int = 7919
    device_codebook: dict = field(default_factory=_codebook)
    # backscatter link
    bc_d_tx_bd_m: float = 0.5
    bc_wavelength_m: float = 299_792_458.0 / 2.4e9
    bc_carrier_hz: float = 2.4e9
    bc_g_tx: float = 1.0
    bc_g_bd: float = 1.0
    bc_g_rx: float = 1.0
    bc_noise_floor_dbm: float | None = -80.0
    bc_cfo_hz: float = 0.0
    bc_direct_path_gain: float | None = None
    # receiver
    rx_sync_threshold: int = 6
    rx_sync_gate_db: float = 3.0
    rx_frame_gate_db: float | None = 5.0
    rx_bit_detector: str = "symbol"
    rx_guard_chips: int = 2

    def __post_init__(self):
        for name in ("sweep_d_led_bd_m", "sweep_d_rx_bd_m", "sweep_p_tx_dbm"):
            vals = tuple(float(v) for v in getattr(self, name))
            if not vals:
                raise ValueError(f"{dotted(name)} must be non-empty")
            object.__setattr__(self, name, vals)
        kinds = tuple(str(k) for k in self.sweep_kinds)
        if not kinds:
            raise ValueError("at least one device kind is required")
        for k in kinds:
            AmbdKind(k)
        object.__setattr__(self, "sweep_kinds", kinds)
        if self.sweep_frames < 1:
            raise ValueError("frames per point must be >= 1")
        if self.sweep_batch_frames < 1:
            raise ValueError("batch size must be >= 1")
        if self.sweep_workers < 1:
            raise ValueError("workers must be >= 1")
        if self.rx_guard_chips < 0:
            raise ValueError("guard chips must be >= 0")
        # build everything once so bad values fail at load time
        self.tx_cfg(), self.demod_cfg(), self.store(), self.reflection(), self.ambd_cfg("control")
        self.rx_front_end(), self.bc_geometry(0.5), self.pv_front_end("eh"), self.profile()

    # ------------------------------------------------------------ module configs
    def tx_cfg(self) -> VlcTxConfig:
        return VlcTxConfig(self.vlc_f0_hz, self.vlc_f1_hz, self.vlc_chip_duration_s, self.vlc_sample_rate_hz,
                           self.vlc_optical_power_w, self.vlc_modulation_index)

    def demod_cfg(self) -> DemodConfig:
        return DemodConfig(self.vlc_f0_hz, self.vlc_f1_hz, self.vlc_chip_duration_s, self.vlc_sample_rate_hz,
                           18, self.rx_sync_threshold, self.rx_sync_gate_db, self.rx_bit_detector,
                           self.rx_frame_gate_db)

    def vlc_geometry(self, d_led: float) -> VlcGeometry:
        return VlcGeometry(d_led, self.vlc_emit_angle_rad, self.vlc_incidence_angle_rad,
                           self.vlc_lambertian_order, self.vlc_detector_area_m2)

    def pv_front_end(self, kind: str) -> PvFrontEnd:
        noise = getattr(self, f"vlc_noise_{AmbdKind(kind).value}_v2")
        return PvFrontEnd(self.vlc_responsivity_a_per_w, self.vlc_load_ohm, self.vlc_conversion_efficiency, noise)

    def store(self) -> EnergyStore:
        cap = self.energy_cell_capacitance_f * (self.energy_cells if self.energy_topology == "parallel"
                                                else 1.0 / self.energy_cells)
        if self.energy_topology not in ("parallel", "series"):
            raise ValueError("energy.topology must be parallel or series")
        return EnergyStore(cap, self.energy_v_init, self.energy_v_max, self.energy_v_min_operate)

    def profile(self) -> PowerProfile:
        return PowerProfile({"sleep": self.energy_p_sleep_w, "decode": self.energy_p_decode_w,
                             "sense": self.energy_p_sense_w, "modulate": self.energy_p_modulate_w})

    def lpf(self) -> LpfSpec:
        return LpfSpec(self.energy_lpf_cutoff_hz, 1)

    def reflection(self) -> ReflectionPair:
        return ReflectionPair(self.device_gamma_open, self.device_gamma_short)

    def ambd_cfg(self, kind: str) -> AmbdConfig:
        return AmbdConfig(kind=AmbdKind(kind), tx_cfg=self.tx_cfg(),
                          hysteresis_fraction=self.device_hysteresis_fraction,
                          relay_band=self.device_relay_band_hz,
                          relay_filter_order=self.device_relay_filter_order,
                          command_codebook=dict(self.device_codebook),
                          sensor=SensorModel(self.device_sensor_base, self.device_sensor_step))

    def bc_geometry(self, d_rx: float) -> BcGeometry:
        m = self.reflection().mod_factor
        return BcGeometry(self.bc_d_tx_bd_m, d_rx, self.bc_g_tx, self.bc_g_bd, self.bc_g_rx,
                          self.bc_wavelength_m, m)

    def source(self, p_tx: float) -> RfSourceConfig:
        return RfSourceConfig(p_tx, self.bc_carrier_hz)

    def rx_front_end(self) -> RxFrontEndConfig:
        return RxFrontEndConfig(self.vlc_sample_rate_hz, self.bc_noise_floor_dbm, self.bc_direct_path_gain,
                                self.bc_cfo_hz)

    def replace(self, **kw) -> "RunConfig":
        return dataclasses.replace(self, **kw)

    # ------------------------------------------------------------ sweep layout
    def sweep_points(self):
        """Grid cells in canonical order: per kind, the d_led line then the d_rx line."""
        pts = []
        for kind in self.sweep_kinds:
            for d in self.sweep_d_led_bd_m:
                for p in self.sweep_p_tx_dbm:
                    pts.append((kind, d, self.sweep_fixed_d_rx_bd_m, p))
            for d in self.sweep_d_rx_bd_m:
                for p in self.sweep_p_tx_dbm:
                    pts.append((kind, self.sweep_fixed_d_led_bd_m, d, p))
        return pts


def field_name(key: str) -> str:
    return key.replace(".", "_")


def dotted(name: str) -> str:
    section, _, rest = name.partition("_")
    return f"{section}.{rest}"


def config_keys():
    return [dotted(f.name) for f in dataclasses.fields(RunConfig)]


def _flatten(d, prefix=""):
    out = {}
    for k, v in d.items():
        key = f"{prefix}{k}"
        if isinstance(v, dict) and "." not in str(k) and not key.endswith("codebook"):
            out.update(_flatten(v, key + "."))
        else:
            out[key] = v
    return out


def from_mapping(values: dict, base: RunConfig | None = None) -> RunConfig:
    base = base or RunConfig()
    names = {f.name for f in dataclasses.fields(RunConfig)}
    kw = {}
    for key, val in _flatten(values).items():
        name = field_name(key)
        if name not in names:
            raise KeyError(f"unknown config key {key!r}")
        if isinstance(val, list):
            val = tuple(val)
        kw[name] = val
    return dataclasses.replace(base, **kw)


def load_config(path) -> RunConfig:
    with open(path) as fh:
        data = yaml.safe_load(fh) or {}
    if not isinstance(data, dict):
        raise ValueError("config file must hold a mapping of dotted keys")
    return from_mapping(data)


def dump_config(cfg: RunConfig) -> str:
    out = {}
    for f in dataclasses.fields(RunConfig):
        v = getattr(cfg, f.name)
        out[dotted(f.name)] = list(v) if isinstance(v, tuple) else v
    return yaml.safe_dump(out, sort_keys=False)


def kinds_from_flag(flag: str):
    if flag == "all":
        return KINDS
    AmbdKind(flag)
    return (flag,)


def as_float_tuple(x):
    return tuple(float(v) for v in np.atleast_1d(x))
