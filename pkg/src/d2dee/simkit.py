"""Monte Carlo campaign runner: networks, transmission slots, scheme
comparison and the three headline metrics (expected energy per slot,
network energy efficiency in bits per joule, transmissions until the
first battery dies).

Replications are independent: each owns a counter-based RNG stream keyed
by (master seed, replication index), its own network draw and its own
accumulators, so results are bit-identical however replications are
scheduled across workers.  Within a slot the random-draw pattern depends
only on the network and the source, never on the scheme, which makes
equal-seed campaigns exactly paired across schemes.
"""

from __future__ import annotations

import enum
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .bounds import ShadowScenario
from .channel import Hop, SnrSample
from .config import ScenarioConfig
from .energy import RadioParams, SelectionMode, optimal_power, transmission_time_s
from .protocol import (
    BackoffConfig,
    DeviceSnapshot,
    OverheadEnergies,
    Path,
    run_selection_round,
)

__all__ = [
    "Device",
    "Ring",
    "UniformAnnulus",
    "Scheme",
    "CampaignResult",
    "generate_network",
    "run_campaign",
    "depletion_experiment",
    "replication_rng",
    "ring_scenario",
]


@dataclass(frozen=True)
class Ring:
    radius_m: float


@dataclass(frozen=True)
class UniformAnnulus:
    r_min_m: float
    r_max_m: float

    def __post_init__(self):
        if self.r_min_m >= self.r_max_m:
            raise ValueError("r_min_m must be < r_max_m")


class Scheme(enum.Enum):
    DSR_SINGLE_HOP = "dsr_single_hop"
    DSR_DUAL_HOP = "dsr_dual_hop"
    OR_SINGLE_HOP = "or_single_hop"
    OR_DUAL_HOP = "or_dual_hop"
    DIRECT = "direct"


_SCHEME_MODE = {
    Scheme.DSR_SINGLE_HOP: (SelectionMode.SINGLE_HOP, "dsr"),
    Scheme.DSR_DUAL_HOP: (SelectionMode.DUAL_HOP, "dsr"),
    Scheme.OR_SINGLE_HOP: (SelectionMode.SINGLE_HOP, "or"),
    Scheme.OR_DUAL_HOP: (SelectionMode.DUAL_HOP, "or"),
}


@dataclass(slots=True)
class Device:
    device_id: int
    x_m: float
    y_m: float
    pckt_w: float
    battery_J: float

    @property
    def alive(self) -> bool:
        return self.battery_J > 0.0


@dataclass(frozen=True)
class CampaignResult:
    scheme: Scheme
    n_devices: int
    layout: str
    n_replications: int
    mean_energy_J: float
    stderr_energy_J: float
    energy_efficiency_bpj: float
    stderr_efficiency_bpj: float
    relay_fraction_p: float
    stderr_relay_fraction: float
    mean_second_hop_J: float      # relayed slots only; bound cross-checks
    n_tx_until_depletion: float | None = None
    stderr_depletion: float | None = None

    def __post_init__(self):
        if not (0.0 <= self.relay_fraction_p <= 1.0):
            raise ValueError("relay_fraction_p must lie in [0, 1]")


def replication_rng(master_seed: int, rep_index: int) -> np.random.Generator:
    """Counter-based stream for one replication; schedule-independent."""
    return np.random.Generator(np.random.Philox(key=(np.uint64(master_seed), np.uint64(rep_index))))


def ring_scenario(cfg: ScenarioConfig, n: int) -> ShadowScenario:
    """Bound-verification scenario implied by a ring-layout config."""
    budget = 10.0 * math.log10(cfg.tx_power_w / cfg.noise_w)
    gbar = -10.0 * cfg.pathloss_alpha * math.log10(cfg.ring_radius_m) + cfg.pathloss_norm_g_db + budget
    return ShadowScenario(gbar, cfg.sigma_db, cfg.gamma_th_db, cfg.eta1_J, cfg.eta2_J_per_w,
                          cfg.pckt_min_w, cfg.pckt_max_w, n_devices=n)


def generate_network(
    n: int,
    layout: Ring | UniformAnnulus,
    rng: np.random.Generator,
    pckt_min_w: float = 0.0,
    pckt_max_w: float = 0.0,
    battery_J: float = math.inf,
) -> list[Device]:
    """Place n devices around a base station at the origin.

    Ring puts everyone at the exact radius (bound-verification geometry);
    UniformAnnulus draws positions uniform in area between the two radii.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    theta = rng.uniform(0.0, 2.0 * math.pi, n)
    if isinstance(layout, Ring):
        r = np.full(n, layout.radius_m)
    else:
        r = np.sqrt(rng.uniform(layout.r_min_m**2, layout.r_max_m**2, n))
    pckt = rng.uniform(pckt_min_w, pckt_max_w, n) if pckt_max_w > pckt_min_w else np.full(n, pckt_min_w)
    return [
        Device(i, float(r[i] * math.cos(theta[i])), float(r[i] * math.sin(theta[i])), float(pckt[i]), battery_J)
        for i in range(n)
    ]


class _DrawBuffer:
    """Flat buffers of pre-drawn randoms; consumption order is the contract."""

    def __init__(self, rng: np.random.Generator, chunk: int = 16384):
        self.rng = rng
        self.chunk = chunk
        self._norm = rng.standard_normal(chunk)
        self._exp = rng.standard_exponential(chunk)
        self._ni = 0
        self._ei = 0

    def normals(self, k: int) -> np.ndarray:
        if self._ni + k > self._norm.size:
            self._norm = self.rng.standard_normal(max(self.chunk, k))
            self._ni = 0
        out = self._norm[self._ni:self._ni + k]
        self._ni += k
        return out

    def exponentials(self, k: int) -> np.ndarray:
        if self._ei + k > self._exp.size:
            self._exp = self.rng.standard_exponential(max(self.chunk, k))
            self._ei = 0
        out = self._exp[self._ei:self._ei + k]
        self._ei += k
        return out


@dataclass
class _Env:
    """Static per-replication environment shared by every slot."""

    cfg: ScenarioConfig
    devices: list[Device]
    mean_bs_db: np.ndarray          # per device
    d2d_mean_lin: np.ndarray        # n x n mean linear SNR between devices
    neighbors: list[np.ndarray]     # in-range candidate ids per device
    adjacency: dict[int, set[int]]  # overhearing graph for hidden-node handling
    radio: RadioParams
    oh: OverheadEnergies
    backoff: BackoffConfig


def _mean_bs_db_for(cfg: ScenarioConfig, r_m: np.ndarray) -> np.ndarray:
    budget = 10.0 * math.log10(cfg.tx_power_w / cfg.noise_w)
    return -10.0 * cfg.pathloss_alpha * np.log10(r_m) + cfg.pathloss_norm_g_db + budget


def _build_env(cfg: ScenarioConfig, rng: np.random.Generator) -> _Env:
    layout = Ring(cfg.ring_radius_m) if cfg.layout == "ring" else UniformAnnulus(cfg.annulus_r_min_m, cfg.annulus_r_max_m)
    devices = generate_network(cfg.n_devices, layout, rng, cfg.pckt_min_w, cfg.pckt_max_w, cfg.battery_J)
    xy = np.array([[d.x_m, d.y_m] for d in devices])
    r = np.hypot(xy[:, 0], xy[:, 1])
    mean_bs = _mean_bs_db_for(cfg, r)
    diff = xy[:, None, :] - xy[None, :, :]
    dist = np.hypot(diff[..., 0], diff[..., 1])
    np.fill_diagonal(dist, np.inf)
    d2d_mean = dist ** (-cfg.d2d_pathloss_alpha) * cfg.tx_power_w / cfg.d2d_noise_w
    if cfg.d2d_whole_network:
        in_range = np.isfinite(dist)
    else:
        in_range = dist <= cfg.d2d_range_m
    neighbors = [np.flatnonzero(in_range[i]) for i in range(cfg.n_devices)]
    adjacency = {i: set(np.flatnonzero(in_range[i]).tolist()) for i in range(cfg.n_devices)}
    radio = RadioParams(cfg.tx_power_w, 0.0, cfg.payload_bits, cfg.bandwidth_hz)
    oh = OverheadEnergies(
        cfg.rtr_tx_uj * 1e-6, cfg.rtr_rx_uj * 1e-6, cfg.ctr_tx_uj * 1e-6, cfg.ctr_rx_uj * 1e-6,
        cfg.csi_uj * 1e-6, cfg.dec_uj * 1e-6, cfg.enc_uj * 1e-6,
    )
    e0 = cfg.backoff_scale_uj * 1e-6 if cfg.backoff_scale_uj > 0 else _calibrate_e0(cfg, mean_bs, rng)
    backoff = BackoffConfig(cfg.tau_max_s, e0, cfg.tau_th_s, cfg.collision_window_s)
    return _Env(cfg, devices, mean_bs, d2d_mean, neighbors, adjacency, radio, oh, backoff)


def _calibrate_e0(cfg: ScenarioConfig, mean_bs: np.ndarray, rng: np.random.Generator, n_probe: int = 256) -> float:
    """Median direct energy of the scenario, the back-off map's energy scale."""
    idx = rng.integers(0, mean_bs.size, n_probe)
    x = mean_bs[idx] + cfg.sigma_db * rng.standard_normal(n_probe)
    gamma = 10.0 ** (x / 10.0)
    t = cfg.payload_bits / (cfg.bandwidth_hz * np.log2(1.0 + gamma))
    e = (cfg.tx_power_w + 0.5 * (cfg.pckt_min_w + cfg.pckt_max_w)) * t
    return float(np.median(e))


@dataclass(slots=True)
class _Accum:
    slots: int = 0
    energy_J: float = 0.0
    delivered_bits: float = 0.0
    relayed: int = 0
    second_hop_J: float = 0.0


def _effective_power(env: _Env, gamma_lin: float, pckt_w: float) -> tuple[float, float]:
    """(tx power, scaled SNR) after the optional per-link power control."""
    cfg = env.cfg
    g = gamma_lin / cfg.tx_power_w
    p = optimal_power(g, pckt_w, cfg.pmin_w, cfg.pmax_w)
    return p, g * p


def _run_slot(env: _Env, scheme: Scheme, src: int, cand_ids: np.ndarray,
              z_src: float, z_cand: np.ndarray, f_cand: np.ndarray,
              acc: _Accum, batteries: np.ndarray | None) -> None:
    cfg = env.cfg
    src_dev = env.devices[src]
    x_src = env.mean_bs_db[src] + cfg.sigma_db * z_src
    gamma_src = 10.0 ** (x_src / 10.0)

    if scheme is Scheme.DIRECT or cand_ids.size == 0:
        if scheme is Scheme.DIRECT:
            t = cfg.payload_bits / (cfg.bandwidth_hz * math.log2(1.0 + gamma_src))
            p_tx = cfg.tx_power_w
            if cfg.power_control:
                p_tx, g_eff = _effective_power(env, gamma_src, src_dev.pckt_w)
                t = cfg.payload_bits / (cfg.bandwidth_hz * math.log2(1.0 + g_eff))
            e = (p_tx + src_dev.pckt_w) * t
            charges = {src: e}
        else:
            # protocol round with an empty candidate set: RTR only, then fallback
            t = cfg.payload_bits / (cfg.bandwidth_hz * math.log2(1.0 + gamma_src))
            e = (cfg.tx_power_w + src_dev.pckt_w) * t + env.oh.rtr_tx_J
            charges = {src: e}
        acc.slots += 1
        acc.energy_J += e
        if x_src >= cfg.gamma_th_db:
            acc.delivered_bits += cfg.payload_bits
        if batteries is not None:
            for dev, val in charges.items():
                batteries[dev] -= val
        return

    mode, metric = _SCHEME_MODE[scheme]
    pc = cfg.power_control
    if pc:
        p_src, g_src_eff = _effective_power(env, gamma_src, src_dev.pckt_w)
        src_snap = DeviceSnapshot(src, SnrSample.from_linear(g_src_eff, Hop.TO_BASE_STATION),
                                  None, src_dev.pckt_w, p_src)
    else:
        src_snap = DeviceSnapshot(src, SnrSample(x_src, gamma_src, Hop.TO_BASE_STATION),
                                  None, src_dev.pckt_w)
    cands = []
    for j, cid in enumerate(cand_ids):
        x_c = env.mean_bs_db[cid] + cfg.sigma_db * z_cand[j]
        g_c = 10.0 ** (x_c / 10.0)
        g_d = env.d2d_mean_lin[src, cid] * f_cand[j]
        pckt_c = env.devices[cid].pckt_w
        if pc:
            _, g_c = _effective_power(env, g_c, pckt_c)
            x_c = 10.0 * math.log10(g_c)
        cands.append(DeviceSnapshot(int(cid),
                                    SnrSample(x_c, g_c, Hop.TO_BASE_STATION),
                                    SnrSample.from_linear(max(g_d, 1e-300), Hop.DEVICE_TO_DEVICE),
                                    pckt_c))
    outcome = run_selection_round(
        src_snap, cands, mode, env.oh, env.backoff, env.radio,
        gamma_th_db=cfg.gamma_th_db, gamma_th_d2d_db=cfg.gamma_th_d2d_db,
        contention=env.adjacency, metric=metric,
    )
    acc.slots += 1
    acc.energy_J += outcome.breakdown.total_J
    if outcome.path is Path.RELAYED:
        acc.relayed += 1
        acc.second_hop_J += _second_hop_energy(env, outcome.relay_id, cands)
        acc.delivered_bits += cfg.payload_bits
    elif x_src >= cfg.gamma_th_db:
        acc.delivered_bits += cfg.payload_bits
    if batteries is not None:
        for dev, val in outcome.charges.items():
            batteries[dev] -= val


def _second_hop_energy(env: _Env, relay_id: int, cands: list[DeviceSnapshot]) -> float:
    for c in cands:
        if c.device_id == relay_id:
            p = env.radio.tx_power_w if c.tx_power_w is None else c.tx_power_w
            t = transmission_time_s(c.bs_snr.value_linear, env.radio.payload_bits, env.radio.bandwidth_hz)
            return (p + c.pckt_w) * t
    raise RuntimeError("selected relay missing from candidate list")


def _run_replication(cfg: ScenarioConfig, scheme: Scheme, master_seed: int, rep: int,
                     battery_mode: bool) -> dict:
    rng = replication_rng(master_seed, rep)
    env = _build_env(cfg, rng)
    buf = _DrawBuffer(rng)
    n = cfg.n_devices
    batteries = np.array([d.battery_J for d in env.devices]) if battery_mode else None
    alive = list(range(n))
    acc = _Accum()
    max_slots = cfg.max_depletion_slots if battery_mode else cfg.slots_per_replication
    depletion_slot = None
    for slot in range(max_slots):
        if battery_mode and len(alive) == 0:
            break
        src = alive[int(rng.integers(0, len(alive)))] if battery_mode else int(rng.integers(0, n))
        cand_ids = env.neighbors[src]
        if battery_mode and cand_ids.size:
            cand_ids = cand_ids[batteries[cand_ids] > 0.0]
        z = buf.normals(1 + cand_ids.size)
        f = buf.exponentials(cand_ids.size)
        _run_slot(env, scheme, src, cand_ids, float(z[0]), z[1:], f, acc, batteries)
        if battery_mode and np.any(batteries <= 0.0):
            depletion_slot = slot + 1
            break
    return {
        "slots": acc.slots,
        "energy_J": acc.energy_J,
        "delivered_bits": acc.delivered_bits,
        "relayed": acc.relayed,
        "second_hop_J": acc.second_hop_J,
        "depletion_slot": depletion_slot,
    }


def depletion_experiment(cfg: ScenarioConfig, scheme: Scheme, master_seed: int, rep: int = 0) -> int:
    """Slots until the first battery reaches zero, one replication."""
    out = _run_replication(cfg, scheme, master_seed, rep, battery_mode=True)
    if out["depletion_slot"] is None:
        raise RuntimeError(f"no depletion within max_depletion_slots={cfg.max_depletion_slots}")
    return out["depletion_slot"]


def _worker(args):
    cfg, scheme, master_seed, rep, battery = args
    return rep, _run_replication(cfg, scheme, master_seed, rep, battery)


def run_campaign(
    cfg: ScenarioConfig,
    scheme: Scheme,
    replications: int | None = None,
    master_seed: int | None = None,
    threads: int = 1,
) -> CampaignResult:
    """Run `replications` independent replications and aggregate the metrics.

    In battery mode each replication runs to first depletion; otherwise it
    runs cfg.slots_per_replication slots.  Standard errors come from the
    spread across replications, so interpret them only once the count is
    reasonably large (the default campaigns use >= 30).
    """
    reps = cfg.replications if replications is None else replications
    seed = cfg.seed if master_seed is None else master_seed
    battery = cfg.battery_mode
    jobs = [(cfg, scheme, seed, r, battery) for r in range(reps)]
    results: list[dict | None] = [None] * reps
    if threads > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            for rep, out in pool.map(_worker, jobs, chunksize=max(1, reps // (4 * threads))):
                results[rep] = out
    else:
        for job in jobs:
            rep, out = _worker(job)
            results[rep] = out
    slots = np.array([r["slots"] for r in results], dtype=float)
    energy = np.array([r["energy_J"] for r in results])
    bits = np.array([r["delivered_bits"] for r in results])
    relayed = np.array([r["relayed"] for r in results], dtype=float)
    second = np.array([r["second_hop_J"] for r in results])

    per_slot = energy / slots
    ee = np.where(energy > 0, bits / energy, 0.0)
    pfrac = relayed / slots

    def mse(v: np.ndarray) -> tuple[float, float]:
        if reps < 2:
            return float(v.mean()), 0.0
        return float(v.mean()), float(v.std(ddof=1) / math.sqrt(reps))

    me, se_e = mse(per_slot)
    mee, se_ee = mse(ee)
    mp, se_p = mse(pfrac)
    total_relayed = relayed.sum()
    mean_second = float(second.sum() / total_relayed) if total_relayed > 0 else 0.0
    dep = dep_se = None
    if battery:
        if any(r["depletion_slot"] is None for r in results):
            raise RuntimeError("some replications never depleted; raise max_depletion_slots")
        dep, dep_se = mse(np.array([r["depletion_slot"] for r in results], dtype=float))
    return CampaignResult(
        scheme=scheme, n_devices=cfg.n_devices, layout=cfg.layout, n_replications=reps,
        mean_energy_J=me, stderr_energy_J=se_e,
        energy_efficiency_bpj=mee, stderr_efficiency_bpj=se_ee,
        relay_fraction_p=mp, stderr_relay_fraction=se_p,
        mean_second_hop_J=mean_second,
        n_tx_until_depletion=dep, stderr_depletion=dep_se,
    )
