"""Per-transmission energy model and relay-selection metrics.

A packet of L bits sent at SNR gamma over bandwidth B occupies the channel
for L / (B log2(1+gamma)) seconds; radiated and circuit power are charged
for that duration.  The same formula covers both hop types (the log-base
variants found in different write-ups reduce to it).
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import NamedTuple

from scipy.optimize import brentq

from .channel import Hop, SnrSample

__all__ = [
    "RadioParams",
    "Path",
    "SelectionMode",
    "TxEnergy",
    "EnergyBreakdown",
    "OutageBelowThreshold",
    "SolverFailure",
    "transmission_time_s",
    "direct_energy",
    "d2d_energy",
    "optimal_power",
    "selection_metric",
]


class Path(enum.Enum):
    DIRECT = "direct"
    RELAYED = "relayed"


class SelectionMode(enum.Enum):
    DUAL_HOP = "dual_hop"
    SINGLE_HOP = "single_hop"


class OutageBelowThreshold(Exception):
    """SNR below the minimum-rate threshold; caller decides the policy."""

    def __init__(self, gamma_db: float, threshold_db: float):
        super().__init__(f"SNR {gamma_db:.2f} dB below threshold {threshold_db:.2f} dB")
        self.gamma_db = gamma_db
        self.threshold_db = threshold_db


class SolverFailure(RuntimeError):
    pass


@dataclass(frozen=True)
class RadioParams:
    tx_power_w: float
    circuit_power_w: float
    payload_bits: int
    bandwidth_hz: float

    def __post_init__(self):
        if self.tx_power_w <= 0 or self.bandwidth_hz <= 0:
            raise ValueError("tx_power_w and bandwidth_hz must be > 0")
        if self.circuit_power_w < 0:
            raise ValueError("circuit_power_w must be >= 0")
        if int(self.payload_bits) != self.payload_bits or self.payload_bits <= 0:
            raise ValueError("payload_bits must be a positive integer")

    @property
    def eta1_J(self) -> float:
        """ln(2) P L / B, the radiated-energy coefficient in the ln domain."""
        return math.log(2.0) * self.tx_power_w * self.payload_bits / self.bandwidth_hz

    @property
    def eta2_J_per_w(self) -> float:
        return self.eta1_J / self.tx_power_w


class TxEnergy(NamedTuple):
    """Radiated/circuit split of one transmission."""

    data_J: float
    circuit_J: float

    @property
    def total_J(self) -> float:
        return self.data_J + self.circuit_J


@dataclass(frozen=True, slots=True)
class EnergyBreakdown:
    """Energy of one protocol round split into its accounting buckets."""

    data_tx_J: float
    circuit_J: float
    overhead_J: float
    total_J: float
    path: Path

    @classmethod
    def build(cls, data_tx_J: float, circuit_J: float, overhead_J: float, path: Path) -> "EnergyBreakdown":
        if min(data_tx_J, circuit_J, overhead_J) < 0:
            raise ValueError("energy components must be >= 0")
        return cls(data_tx_J, circuit_J, overhead_J, data_tx_J + circuit_J + overhead_J, path)


def transmission_time_s(gamma_linear: float, payload_bits: float, bandwidth_hz: float) -> float:
    """Channel occupancy L / (B log2(1+gamma))."""
    if gamma_linear <= 0:
        raise ValueError(f"gamma_linear must be > 0, got {gamma_linear}")
    return payload_bits / (bandwidth_hz * math.log2(1.0 + gamma_linear))


def _hop_energy(snr: SnrSample, p: RadioParams, gamma_th_db: float | None) -> TxEnergy:
    if snr.value_linear <= 0:
        raise ValueError("SNR must be positive")
    if gamma_th_db is not None and snr.value_db < gamma_th_db:
        raise OutageBelowThreshold(snr.value_db, gamma_th_db)
    t = transmission_time_s(snr.value_linear, p.payload_bits, p.bandwidth_hz)
    return TxEnergy(p.tx_power_w * t, p.circuit_power_w * t)


def direct_energy(snr: SnrSample, p: RadioParams, gamma_th_db: float | None = None) -> TxEnergy:
    """Energy of one device -> BS transmission, split into data/circuit parts.

    Raises OutageBelowThreshold when a threshold is supplied and the
    realization falls under it.
    """
    return _hop_energy(snr, p, gamma_th_db)


def d2d_energy(snr: SnrSample, p: RadioParams, gamma_th_db: float | None = None) -> TxEnergy:
    """Energy of relaying the payload over the D2D hop.

    Identical formula to `direct_energy`; kept separate so the hop type is
    checked and the call sites read like the protocol.
    """
    if snr.hop is not Hop.DEVICE_TO_DEVICE:
        raise ValueError("d2d_energy expects a device-to-device SNR sample")
    return _hop_energy(snr, p, gamma_th_db)


def _energy_at_power(p_w: float, g_per_w: float, pckt_w: float) -> float:
    # Energy per bit*ln2/B units: (P+Pckt)/ln(1+gP); limit handled at P=0.
    if p_w == 0.0:
        return math.inf if pckt_w > 0 else 1.0 / g_per_w
    return (p_w + pckt_w) / math.log1p(g_per_w * p_w)


def optimal_power(
    g_per_w: float,
    pckt_w: float,
    p_min_w: float,
    p_max_w: float,
    rel_residual: float = 1e-9,
) -> float:
    """Transmit power minimizing per-packet energy at channel gain g = gamma/P.

    Solves (1+gP) ln(1+gP) = g (P + Pckt), the stationarity condition of
    (P+Pckt)/ln(1+gP).  The left side minus the right is strictly increasing
    in P, so the interior root is unique; when it falls outside
    [p_min_w, p_max_w] the boundary with lower energy is returned.
    """
    if g_per_w <= 0:
        raise ValueError("g_per_w must be > 0")
    if pckt_w < 0:
        raise ValueError("pckt_w must be >= 0")
    if not (0 <= p_min_w < p_max_w):
        raise ValueError("require 0 <= p_min_w < p_max_w")

    target = g_per_w * pckt_w

    def h(y: float) -> float:
        # (1+y)ln(1+y) - y, strictly increasing, h(0) = 0.
        return (1.0 + y) * math.log1p(y) - y

    if target == 0.0:
        root = 0.0
    else:
        hi = 1.0
        for _ in range(400):
            if h(hi) >= target:
                break
            hi *= 2.0
        else:
            raise SolverFailure(f"could not bracket root: h({hi})={h(hi)} < {target}")
        root = brentq(lambda y: h(y) - target, 0.0, hi, xtol=1e-300, rtol=8.9e-16, maxiter=300) / g_per_w

    if p_min_w <= root <= p_max_w:
        lhs = (1.0 + g_per_w * root) * math.log1p(g_per_w * root)
        rhs = g_per_w * (root + pckt_w)
        if abs(lhs - rhs) > rel_residual * max(rhs, 1e-300):
            raise SolverFailure(
                f"residual {abs(lhs - rhs):.3e} exceeds {rel_residual:.1e} * {rhs:.3e} at P*={root:.6e}"
            )
        return root
    # Energy is unimodal with its minimum at the root, so outside the interval
    # the best admissible power is the boundary nearer the root.
    candidates = [(p, _energy_at_power(p, g_per_w, pckt_w)) for p in (p_min_w, p_max_w)]
    return min(candidates, key=lambda pe: pe[1])[0]


def selection_metric(
    e_second_hop_J: float,
    e_d2d_J: float,
    e_overhead_J: float,
    mode: SelectionMode,
) -> float:
    """Candidate ranking value: total consumed energy, or second hop only."""
    if min(e_second_hop_J, e_d2d_J, e_overhead_J) < 0:
        raise ValueError("energies must be >= 0")
    if mode is SelectionMode.DUAL_HOP:
        return e_second_hop_J + e_d2d_J + e_overhead_J
    return e_second_hop_J
