"""Scenario configuration: one flat `key = value` file drives a whole run.

Keys carry their unit in the name.  Unknown keys, type errors and
invariant violations fail fast with the offending line or key named.
The full default set is dumped by `defaults_dump()` and echoed into every
output file for provenance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields
from typing import Any

__all__ = ["ScenarioConfig", "ConfigError", "parse_config", "parse_config_text", "defaults_dump"]

TOOL_VERSION = "d2dee 0.1.0"


class ConfigError(ValueError):
    pass


@dataclass
class ScenarioConfig:
    # randomness
    seed: int = 12345
    # radio, both hops
    tx_power_dbm: float = 23.0
    bandwidth_hz: float = 2.0e5
    payload_bits: int = 8192
    noise_dbm_per_hz: float = -174.0
    interference_db: float = 20.0       # raised noise floor at the BS
    d2d_interference_db: float = 0.0
    # channel
    pathloss_alpha: float = 4.0
    d2d_pathloss_alpha: float = 3.0
    pathloss_norm_g_db: float = 0.0
    sigma_db: float = 4.0
    gamma_th_db: float = 3.0
    gamma_th_d2d_db: float = 3.0
    # geometry
    layout: str = "annulus"             # "annulus" | "ring"
    ring_radius_m: float = 300.0
    annulus_r_min_m: float = 50.0
    annulus_r_max_m: float = 500.0
    n_devices: int = 50
    d2d_range_m: float = 50.0
    d2d_whole_network: bool = False
    # devices
    pckt_min_w: float = 0.01
    pckt_max_w: float = 0.1
    battery_mwh: float = 0.72
    battery_mode: bool = False
    # campaign
    replications: int = 100
    slots_per_replication: int = 400
    max_depletion_slots: int = 2_000_000
    # back-off / protocol
    tau_max_s: float = 0.01
    tau_th_s: float = 1.0e-5
    collision_window_s: float = 1.0e-5
    backoff_scale_uj: float = 0.0       # 0 -> calibrate to the median direct energy
    # overheads (Table-style constants, microjoules)
    rtr_tx_uj: float = 11.60
    rtr_rx_uj: float = 4.50
    ctr_tx_uj: float = 3.35
    ctr_rx_uj: float = 1.30
    csi_uj: float = 0.0
    dec_uj: float = 0.0
    enc_uj: float = 0.0
    # optional empirical D2D data-plane constants; negative -> compute from SNR
    d2d_data_tx_uj: float = -1.0
    d2d_data_rx_uj: float = -1.0
    # power control
    power_control: bool = False
    pmin_w: float = 0.001
    pmax_w: float = 0.2
    # bounds / numerics
    n_closed_form_max: int = 60
    series_terms: int = 40
    d2d_gamma_max_factor: float = 10.0
    scaling_m: int = 4
    scaling_c_m: float = 0.99
    qpoly_q1: float = 0.4920
    qpoly_q2: float = 0.2287
    qpoly_q3: float = 1.1893

    def validate(self) -> None:
        def bad(key: str, why: str):
            raise ConfigError(f"config key '{key}': {why}")

        if self.sigma_db <= 0:
            bad("sigma_db", f"must be > 0, got {self.sigma_db}")
        if self.bandwidth_hz <= 0:
            bad("bandwidth_hz", "must be > 0")
        if self.payload_bits <= 0:
            bad("payload_bits", "must be > 0")
        if self.layout not in ("annulus", "ring"):
            bad("layout", f"must be 'annulus' or 'ring', got {self.layout!r}")
        if self.ring_radius_m <= 0:
            bad("ring_radius_m", "must be > 0")
        if self.annulus_r_min_m >= self.annulus_r_max_m:
            bad("annulus_r_min_m", "must be < annulus_r_max_m")
        if self.annulus_r_min_m <= 0:
            bad("annulus_r_min_m", "must be > 0")
        if self.n_devices < 1:
            bad("n_devices", "must be >= 1")
        if self.d2d_range_m <= 0:
            bad("d2d_range_m", "must be > 0")
        if not (0 <= self.pckt_min_w <= self.pckt_max_w):
            bad("pckt_min_w", "require 0 <= pckt_min_w <= pckt_max_w")
        if self.battery_mwh <= 0:
            bad("battery_mwh", "must be > 0")
        if self.replications < 1:
            bad("replications", "must be >= 1")
        if self.slots_per_replication < 1:
            bad("slots_per_replication", "must be >= 1")
        if self.tau_max_s <= 0 or self.tau_th_s <= 0:
            bad("tau_max_s", "tau_max_s and tau_th_s must be > 0")
        if self.collision_window_s < 0:
            bad("collision_window_s", "must be >= 0")
        for key in ("rtr_tx_uj", "rtr_rx_uj", "ctr_tx_uj", "ctr_rx_uj", "csi_uj", "dec_uj", "enc_uj"):
            if getattr(self, key) < 0:
                bad(key, "must be >= 0")
        if not (0 <= self.pmin_w < self.pmax_w):
            bad("pmin_w", "require 0 <= pmin_w < pmax_w")
        if self.gamma_th_db <= 0:
            bad("gamma_th_db", "must be > 0 (dB-domain bounds divide by it)")
        if not (0 < self.scaling_c_m <= 1):
            bad("scaling_c_m", "must lie in (0, 1]")
        if self.scaling_m < 1:
            bad("scaling_m", "must be >= 1")
        if self.d2d_gamma_max_factor <= 1:
            bad("d2d_gamma_max_factor", "must be > 1")

    # ---- derived quantities -------------------------------------------
    @property
    def tx_power_w(self) -> float:
        return 10.0 ** (self.tx_power_dbm / 10.0) / 1000.0

    @property
    def noise_w(self) -> float:
        return 10.0 ** ((self.noise_dbm_per_hz + self.interference_db) / 10.0) / 1000.0 * self.bandwidth_hz

    @property
    def d2d_noise_w(self) -> float:
        return 10.0 ** ((self.noise_dbm_per_hz + self.d2d_interference_db) / 10.0) / 1000.0 * self.bandwidth_hz

    @property
    def battery_J(self) -> float:
        return self.battery_mwh * 1e-3 * 3600.0

    @property
    def eta1_J(self) -> float:
        return math.log(2.0) * self.tx_power_w * self.payload_bits / self.bandwidth_hz

    @property
    def eta2_J_per_w(self) -> float:
        return self.eta1_J / self.tx_power_w

    def echo_lines(self, prefix: str = "# ") -> list[str]:
        """Config as comment lines for self-describing output files."""
        out = [f"{prefix}{TOOL_VERSION}"]
        for f in fields(self):
            out.append(f"{prefix}{f.name} = {_fmt(getattr(self, f.name))}")
        return out


def _fmt(v: Any) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    return str(v)


def _coerce(name: str, raw: str, target: Any, where: str) -> Any:
    raw = raw.strip()
    try:
        if target is bool:
            low = raw.lower()
            if low in ("true", "1", "yes", "on"):
                return True
            if low in ("false", "0", "no", "off"):
                return False
            raise ValueError(f"not a boolean: {raw!r}")
        if target is int:
            return int(raw.replace("_", ""))
        if target is float:
            return float(raw)
        return raw
    except ValueError as exc:
        raise ConfigError(f"{where}: key '{name}': {exc}") from None


def parse_config_text(text: str, source: str = "<string>") -> ScenarioConfig:
    """Parse `key = value` lines ('#' comments, blank lines allowed)."""
    cfg = ScenarioConfig()
    types = {f.name: f.type for f in fields(cfg)}
    pytypes = {"int": int, "float": float, "str": str, "bool": bool}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value', got {line.rstrip()!r}")
        key, _, raw = stripped.partition("=")
        key = key.strip()
        if key not in types:
            raise ConfigError(f"{source}:{lineno}: unknown key '{key}'")
        target = pytypes.get(str(types[key]), str)
        setattr(cfg, key, _coerce(key, raw, target, f"{source}:{lineno}"))
    cfg.validate()
    return cfg


def parse_config(path: str) -> ScenarioConfig:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path!r}: {exc}") from None
    return parse_config_text(text, source=path)


def defaults_dump() -> str:
    """Every key with its default, in declaration order."""
    cfg = ScenarioConfig()
    lines = [f"{f.name} = {_fmt(getattr(cfg, f.name))}" for f in fields(cfg)]
    return "\n".join(lines) + "\n"
