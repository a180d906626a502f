"""Distributed relay-selection round: RTR broadcast, back-off contention,
CTR reply, collision and hidden-node handling, energy accounting.

One round is fully deterministic given its channel snapshots: timers are a
monotone map of each contender's energy metric, ties break on device id,
and every joule charged is recorded as an atomic (device, category, value)
event so tests can re-derive the books independently.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .channel import SnrSample
from .energy import (
    EnergyBreakdown,
    Path,
    RadioParams,
    SelectionMode,
    selection_metric,
    transmission_time_s,
)

__all__ = [
    "OverheadEnergies",
    "BackoffConfig",
    "SelectionReason",
    "DeviceSnapshot",
    "ChargeEvent",
    "SelectionOutcome",
    "backoff_map",
    "hidden_node_filter",
    "run_selection_round",
]


@dataclass(frozen=True)
class OverheadEnergies:
    """Fixed control-plane energies, joules per event."""

    rtr_tx_J: float = 11.60e-6
    rtr_rx_J: float = 4.50e-6
    ctr_tx_J: float = 3.35e-6
    ctr_rx_J: float = 1.30e-6
    csi_J: float = 0.0
    dec_J: float = 0.0
    enc_J: float = 0.0

    def __post_init__(self):
        for name in self.__dataclass_fields__:
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")

    def relay_total(self, n_listeners: int) -> float:
        """Full relay-path overhead with n_listeners devices decoding the RTR."""
        return (self.rtr_tx_J + n_listeners * self.rtr_rx_J + self.ctr_tx_J
                + self.ctr_rx_J + self.csi_J + self.dec_J + self.enc_J)

    def direct_total(self, n_listeners: int) -> float:
        return self.rtr_tx_J + n_listeners * self.rtr_rx_J

    @classmethod
    def zero(cls) -> "OverheadEnergies":
        return cls(0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0)


@dataclass(frozen=True)
class BackoffConfig:
    tau_max_s: float = 0.01
    energy_scale_E0_J: float = 1e-3
    tau_th_s: float = 1e-5
    collision_window_s: float = 1e-5

    def __post_init__(self):
        if self.tau_max_s <= 0 or self.tau_th_s <= 0 or self.energy_scale_E0_J <= 0:
            raise ValueError("tau_max_s, tau_th_s and energy_scale_E0_J must be > 0")
        if self.collision_window_s < 0:
            raise ValueError("collision_window_s must be >= 0")


class SelectionReason(enum.Enum):
    NO_CANDIDATES = "no_candidates"
    SOURCE_WINS_CONTENTION = "source_wins_contention"
    CTR_COLLISION = "ctr_collision"
    RELAY_SELECTED = "relay_selected"


@dataclass(slots=True)
class DeviceSnapshot:
    """Per-device channel state frozen for the round (block fading)."""

    device_id: int
    bs_snr: SnrSample
    d2d_snr: SnrSample | None = None   # source -> this device; None for the source itself
    pckt_w: float = 0.0
    tx_power_w: float | None = None    # per-device power override (power control)


@dataclass(frozen=True, slots=True)
class ChargeEvent:
    time_s: float
    device_id: int
    kind: str
    energy_J: float


@dataclass(slots=True)
class SelectionOutcome:
    path: Path
    relay_id: int | None
    reason: SelectionReason
    breakdown: EnergyBreakdown
    latency_s: float
    charges: dict[int, float] = field(default_factory=dict)
    events: list[ChargeEvent] = field(default_factory=list)


def backoff_map(energy_J: float, cfg: BackoffConfig) -> float:
    """Back-off timer tau = tau_max (1 - exp(-E/E0)).

    Strictly increasing in the energy metric and saturating at tau_max, so
    the cheapest contender always fires first and the delay stays bounded.
    """
    if energy_J < 0:
        raise ValueError("energy_J must be >= 0")
    return cfg.tau_max_s * -math.expm1(-energy_J / cfg.energy_scale_E0_J)


def hidden_node_filter(
    candidates: Sequence[int],
    positions: Mapping[int, tuple[float, float]],
    d2d_range_m: float,
) -> dict[int, set[int]]:
    """Who can overhear whose CTR: pairs within d2d_range_m of each other."""
    adj: dict[int, set[int]] = {c: set() for c in candidates}
    cand = list(candidates)
    for i, a in enumerate(cand):
        ax, ay = positions[a]
        for b in cand[i + 1:]:
            bx, by = positions[b]
            if math.hypot(ax - bx, ay - by) <= d2d_range_m:
                adj[a].add(b)
                adj[b].add(a)
    return adj


def _hop_times_and_energy(
    gamma_linear: float, pckt_w: float, radio: RadioParams, tx_power_w: float | None = None
) -> tuple[float, float, float]:
    t = transmission_time_s(gamma_linear, radio.payload_bits, radio.bandwidth_hz)
    p = radio.tx_power_w if tx_power_w is None else tx_power_w
    return t, p * t, pckt_w * t


def run_selection_round(
    source: DeviceSnapshot,
    candidates: Sequence[DeviceSnapshot],
    mode: SelectionMode,
    oh: OverheadEnergies,
    cfg: BackoffConfig,
    radio: RadioParams,
    gamma_th_db: float | None = None,
    gamma_th_d2d_db: float | None = None,
    contention: Mapping[int, set[int]] | None = None,
    rng: np.random.Generator | None = None,
    metric: str = "dsr",
    collect_events: bool = False,
) -> SelectionOutcome:
    """Execute one relay-selection round and account every joule.

    The source broadcasts an RTR and arms its own timer from its direct
    energy; candidates above both SNR thresholds arm timers from their
    selection metric.  A candidate whose timer fires before tau_src +
    tau_th wins unless the two earliest timers land within the collision
    window, in which case both CTRs collide and the source falls back to
    direct transmission.  Losers in range of the winner suppress on
    overhearing its CTR; hidden losers waste a stray CTR that the source
    ignores.  `metric="or"` ranks by channel quality alone (circuit power
    and overheads excluded), giving the SNR-based baseline schemes the
    same contention machinery.  `rng` is accepted for interface parity;
    the round itself is deterministic.
    """
    del rng
    cand_ids = [c.device_id for c in candidates]
    if source.device_id in cand_ids:
        raise ValueError("source must not appear among candidates")
    if len(set(cand_ids)) != len(cand_ids):
        raise ValueError("duplicate candidate ids")
    for c in candidates:
        if c.d2d_snr is None:
            raise ValueError(f"candidate {c.device_id} lacks a d2d snapshot")

    n_listeners = len(candidates)
    events: list[ChargeEvent] = []

    def charge(t: float, dev: int, kind: str, e: float):
        events.append(ChargeEvent(t, dev, kind, e))

    # step 1: RTR broadcast
    t_src, e_src_data, e_src_circ = _hop_times_and_energy(
        source.bs_snr.value_linear, source.pckt_w, radio, source.tx_power_w)
    e_src_total = e_src_data + e_src_circ
    src_metric = e_src_total if metric == "dsr" else e_src_data
    tau_src = backoff_map(src_metric, cfg)
    deadline = tau_src + cfg.tau_th_s
    charge(0.0, source.device_id, "rtr_tx", oh.rtr_tx_J)
    for c in sorted(candidates, key=lambda d: d.device_id):
        charge(0.0, c.device_id, "rtr_rx", oh.rtr_rx_J)

    # step 2: candidate timers
    contenders: list[tuple[float, int, DeviceSnapshot, float, float, float]] = []
    any_eligible = False
    for c in candidates:
        if gamma_th_db is not None and c.bs_snr.value_db < gamma_th_db:
            continue
        if gamma_th_d2d_db is not None and c.d2d_snr.value_db < gamma_th_d2d_db:
            continue
        any_eligible = True
        t2, e2_data, e2_circ = _hop_times_and_energy(c.bs_snr.value_linear, c.pckt_w, radio, c.tx_power_w)
        td, ed_data, ed_circ = _hop_times_and_energy(
            c.d2d_snr.value_linear, source.pckt_w, radio, source.tx_power_w)
        if metric == "dsr":
            m = selection_metric(e2_data + e2_circ, ed_data + ed_circ, oh.relay_total(n_listeners), mode)
        elif metric == "or":
            if mode is SelectionMode.SINGLE_HOP:
                m = e2_data
            else:
                worst = min(c.bs_snr.value_linear, c.d2d_snr.value_linear)
                m = radio.tx_power_w * transmission_time_s(worst, radio.payload_bits, radio.bandwidth_hz)
        else:
            raise ValueError(f"unknown metric {metric!r}")
        tau = backoff_map(m, cfg)
        if tau < deadline:
            contenders.append((tau, c.device_id, c, t2, td, e2_data + e2_circ))
    contenders.sort(key=lambda x: (x[0], x[1]))

    def finish(path, relay_id, reason, latency):
        data = math.fsum(ev.energy_J for ev in events if ev.kind.startswith("data"))
        circ = math.fsum(ev.energy_J for ev in events if ev.kind.startswith("circuit"))
        ovh = math.fsum(ev.energy_J for ev in events
                        if not (ev.kind.startswith("data") or ev.kind.startswith("circuit")))
        breakdown = EnergyBreakdown.build(data, circ, ovh, path)
        per_dev: dict[int, float] = {}
        for ev in sorted(events, key=lambda e: e.device_id):
            per_dev[ev.device_id] = per_dev.get(ev.device_id, 0.0) + ev.energy_J
        return SelectionOutcome(path, relay_id, reason, breakdown, latency, per_dev,
                                events if collect_events else [])

    def direct_fallback(reason):
        charge(deadline, source.device_id, "data_bs_tx", e_src_data)
        charge(deadline, source.device_id, "circuit_bs", e_src_circ)
        return finish(Path.DIRECT, None, reason, deadline + t_src)

    if not contenders:
        return direct_fallback(SelectionReason.SOURCE_WINS_CONTENTION if any_eligible
                               else SelectionReason.NO_CANDIDATES)

    tau_win, win_id, winner, t2_win, td_win, _ = contenders[0]

    # collision of the two earliest CTRs
    if len(contenders) > 1 and contenders[1][0] - tau_win < cfg.collision_window_s:
        second = contenders[1]
        charge(tau_win, win_id, "ctr_tx_collided", oh.ctr_tx_J)
        charge(second[0], second[1], "ctr_tx_collided", oh.ctr_tx_J)
        return direct_fallback(SelectionReason.CTR_COLLISION)

    # clean CTR from the winner
    charge(tau_win, win_id, "ctr_tx", oh.ctr_tx_J)
    charge(tau_win, source.device_id, "ctr_rx", oh.ctr_rx_J)

    # hidden contenders cannot overhear the winner and waste a stray CTR
    if contention is not None:
        reach = contention.get(win_id, set())
        for tau_j, dev_j, *_ in contenders[1:]:
            if dev_j not in reach:
                charge(tau_j, dev_j, "ctr_tx_stray", oh.ctr_tx_J)

    # relayed data path: source sends over D2D, winner decodes/re-encodes and forwards
    _, ed_data, ed_circ = _hop_times_and_energy(
        winner.d2d_snr.value_linear, source.pckt_w, radio, source.tx_power_w)
    _, e2_data, e2_circ = _hop_times_and_energy(
        winner.bs_snr.value_linear, winner.pckt_w, radio, winner.tx_power_w)
    t_d2d_start = tau_win
    charge(t_d2d_start, source.device_id, "data_d2d_tx", ed_data)
    charge(t_d2d_start, source.device_id, "circuit_d2d", ed_circ)
    charge(t_d2d_start + td_win, win_id, "csi", oh.csi_J)
    charge(t_d2d_start + td_win, win_id, "dec", oh.dec_J)
    charge(t_d2d_start + td_win, win_id, "enc", oh.enc_J)
    charge(t_d2d_start + td_win, win_id, "data_bs_tx", e2_data)
    charge(t_d2d_start + td_win, win_id, "circuit_bs", e2_circ)
    return finish(Path.RELAYED, win_id, SelectionReason.RELAY_SELECTED, tau_win + td_win + t2_win)
