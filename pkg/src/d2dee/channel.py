"""SNR models for the two hop types.

Device-to-base-station links see distance path loss plus log-normal
shadowing, so the SNR expressed in dB is Gaussian.  Device-to-device links
are Rayleigh faded, so the linear SNR is exponential.  Samples carry both
domains plus the hop type they came from.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "Hop",
    "LognormalLinkParams",
    "RayleighLinkParams",
    "SnrSample",
    "mean_snr_db",
    "mean_snr_linear",
    "sample_bs_snr",
    "sample_d2d_snr",
    "sample_bs_snr_db",
    "sample_d2d_snr_linear",
]


class Hop(enum.Enum):
    TO_BASE_STATION = "to_base_station"
    DEVICE_TO_DEVICE = "device_to_device"


@dataclass(frozen=True)
class LognormalLinkParams:
    """Device -> BS link: path loss with exponent alpha, log-normal shadowing."""

    distance_m: float
    pathloss_alpha: float
    pathloss_norm_db: float
    tx_power_w: float
    noise_w: float          # thermal noise plus any interference at the BS
    shadow_sigma_db: float  # dB spread of the shadowing term

    def __post_init__(self):
        if self.distance_m <= 0:
            raise ValueError("distance_m must be > 0")
        if self.pathloss_alpha <= 0:
            raise ValueError("pathloss_alpha must be > 0")
        if self.tx_power_w <= 0:
            raise ValueError("tx_power_w must be > 0")
        if self.noise_w <= 0:
            raise ValueError("noise_w must be > 0")
        if self.shadow_sigma_db < 0:
            raise ValueError("shadow_sigma_db must be >= 0")


@dataclass(frozen=True)
class RayleighLinkParams:
    """Device -> device link: path loss plus exponential power fading."""

    distance_m: float
    pathloss_alpha: float
    tx_power_w: float
    noise_w: float

    def __post_init__(self):
        for name in ("distance_m", "pathloss_alpha", "tx_power_w", "noise_w"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be > 0")


@dataclass(frozen=True, slots=True)
class SnrSample:
    """One channel realization, kept in both dB and linear domains."""

    value_db: float
    value_linear: float
    hop: Hop

    @classmethod
    def from_db(cls, value_db: float, hop: Hop) -> "SnrSample":
        return cls(value_db, 10.0 ** (value_db / 10.0), hop)

    @classmethod
    def from_linear(cls, value_linear: float, hop: Hop) -> "SnrSample":
        if value_linear <= 0:
            raise ValueError("value_linear must be > 0")
        return cls(10.0 * math.log10(value_linear), value_linear, hop)

    def consistent(self, rel_tol: float = 1e-12) -> bool:
        return math.isclose(self.value_linear, 10.0 ** (self.value_db / 10.0), rel_tol=rel_tol)


def mean_snr_db(p: LognormalLinkParams) -> float:
    """Mean SNR in dB: the path-loss, normalization and power-budget terms."""
    return (
        -10.0 * p.pathloss_alpha * math.log10(p.distance_m)
        + p.pathloss_norm_db
        + 10.0 * math.log10(p.tx_power_w / p.noise_w)
    )


def mean_snr_linear(p: RayleighLinkParams) -> float:
    """Mean linear SNR of the D2D hop: r^-alpha * P / N0."""
    return p.distance_m ** (-p.pathloss_alpha) * p.tx_power_w / p.noise_w


def sample_bs_snr(p: LognormalLinkParams, rng: np.random.Generator) -> SnrSample:
    """Draw one BS-hop SNR: Gaussian in dB around the mean with the dB spread."""
    db = mean_snr_db(p) + p.shadow_sigma_db * rng.standard_normal()
    return SnrSample.from_db(db, Hop.TO_BASE_STATION)


def sample_d2d_snr(p: RayleighLinkParams, rng: np.random.Generator) -> SnrSample:
    """Draw one D2D-hop SNR: exponential in the linear domain."""
    lin = rng.exponential(mean_snr_linear(p))
    return SnrSample.from_linear(max(lin, 1e-300), Hop.DEVICE_TO_DEVICE)


def sample_bs_snr_db(p: LognormalLinkParams, rng: np.random.Generator, size: int) -> np.ndarray:
    """Vector of BS-hop SNRs in dB (array fast path for campaigns)."""
    return mean_snr_db(p) + p.shadow_sigma_db * rng.standard_normal(size)


def sample_d2d_snr_linear(p: RayleighLinkParams, rng: np.random.Generator, size: int) -> np.ndarray:
    """Vector of D2D-hop linear SNRs."""
    return rng.exponential(mean_snr_linear(p), size)
