"""Protocol round: argmin-oracle equivalence, energy conservation,
collision and hidden-node behaviors, latency guarantee."""

import math

import numpy as np
import pytest

from d2dee.channel import Hop, SnrSample
from d2dee.energy import Path, RadioParams, SelectionMode, selection_metric, transmission_time_s
from d2dee.protocol import (
    BackoffConfig,
    ChargeEvent,
    DeviceSnapshot,
    OverheadEnergies,
    SelectionReason,
    backoff_map,
    hidden_node_filter,
    run_selection_round,
)

RADIO = RadioParams(0.2, 0.0, 8192, 2e5)
OH = OverheadEnergies()  # defaults: the tabulated control-plane constants
CFG = BackoffConfig(tau_max_s=0.01, energy_scale_E0_J=1e-3, tau_th_s=1e-5, collision_window_s=0.0)


def snap(dev_id, bs_db, d2d_db=None, pckt=0.05):
    d2d = None if d2d_db is None else SnrSample.from_db(d2d_db, Hop.DEVICE_TO_DEVICE)
    return DeviceSnapshot(dev_id, SnrSample.from_db(bs_db, Hop.TO_BASE_STATION), d2d, pckt)


def full_graph(ids):
    return {i: set(ids) - {i} for i in ids}


class TestBackoffMap:
    def test_zero_energy(self):
        assert backoff_map(0.0, CFG) == 0.0

    def test_saturates(self):
        assert backoff_map(1e9, CFG) == pytest.approx(CFG.tau_max_s, rel=1e-12)
        assert backoff_map(1e9, CFG) <= CFG.tau_max_s

    def test_strictly_increasing(self):
        rng = np.random.default_rng(2)
        for _ in range(200):
            e1, e2 = sorted(rng.uniform(0.0, 0.02, 2))
            if e1 == e2:
                continue
            assert backoff_map(e1, CFG) < backoff_map(e2, CFG)


class TestHiddenNodeFilter:
    def test_all_in_range(self):
        pos = {1: (0.0, 0.0), 2: (10.0, 0.0), 3: (0.0, 10.0)}
        adj = hidden_node_filter([1, 2, 3], pos, 50.0)
        assert adj == {1: {2, 3}, 2: {1, 3}, 3: {1, 2}}

    def test_out_of_range_pair(self):
        pos = {1: (0.0, 0.0), 2: (100.0, 0.0)}
        adj = hidden_node_filter([1, 2], pos, 50.0)
        assert adj == {1: set(), 2: set()}


class TestSelectionRound:
    def test_no_candidates_direct_with_rtr_only(self):
        src = snap(0, 20.0)
        out = run_selection_round(src, [], SelectionMode.SINGLE_HOP, OH, CFG, RADIO)
        assert out.path is Path.DIRECT
        assert out.reason is SelectionReason.NO_CANDIDATES
        assert out.breakdown.overhead_J == OH.rtr_tx_J

    def test_better_candidate_wins(self):
        src = snap(0, 20.0)
        cands = [snap(1, 26.0, d2d_db=90.0), snap(2, 23.0, d2d_db=90.0)]
        out = run_selection_round(src, cands, SelectionMode.SINGLE_HOP, OH, CFG, RADIO)
        assert out.path is Path.RELAYED and out.relay_id == 1
        assert out.reason is SelectionReason.RELAY_SELECTED

    def test_source_wins_when_candidates_worse(self):
        src = snap(0, 30.0)
        cands = [snap(1, 20.0, d2d_db=90.0)]
        out = run_selection_round(src, cands, SelectionMode.SINGLE_HOP, OH, CFG, RADIO)
        assert out.path is Path.DIRECT
        assert out.reason is SelectionReason.SOURCE_WINS_CONTENTION
        assert out.breakdown.overhead_J == pytest.approx(OH.direct_total(1), rel=1e-12)

    def test_argmin_oracle_over_seeded_trials(self):
        # 10^4 random rounds: the winner is always the metric argmin when
        # windows cannot overlap and everyone hears everyone
        rng = np.random.default_rng(99)
        mismatches = 0
        for _ in range(10_000):
            k = int(rng.integers(1, 6))
            src = snap(0, float(rng.uniform(10, 35)), pckt=float(rng.uniform(0.0, 0.1)))
            cands = [snap(i + 1, float(rng.uniform(10, 35)), d2d_db=float(rng.uniform(60, 100)),
                          pckt=float(rng.uniform(0.0, 0.1))) for i in range(k)]
            mode = SelectionMode.DUAL_HOP if rng.random() < 0.5 else SelectionMode.SINGLE_HOP
            out = run_selection_round(src, cands, mode, OH, CFG, RADIO,
                                      contention=full_graph(range(k + 2)))
            metrics = {}
            for c in cands:
                t2 = transmission_time_s(c.bs_snr.value_linear, 8192, 2e5)
                td = transmission_time_s(c.d2d_snr.value_linear, 8192, 2e5)
                e2 = (0.2 + c.pckt_w) * t2
                ed = (0.2 + src.pckt_w) * td
                metrics[c.device_id] = selection_metric(e2, ed, OH.relay_total(k), mode)
            t_src = transmission_time_s(src.bs_snr.value_linear, 8192, 2e5)
            e_src = (0.2 + src.pckt_w) * t_src
            best = min(metrics, key=lambda i: (metrics[i], i))
            tau_best = backoff_map(metrics[best], CFG)
            expect = best if tau_best < backoff_map(e_src, CFG) + CFG.tau_th_s else None
            if out.relay_id != expect:
                mismatches += 1
        assert mismatches == 0

    def test_energy_conservation_and_breakdown(self):
        src = snap(0, 18.0, pckt=0.07)
        cands = [snap(1, 24.0, d2d_db=85.0, pckt=0.02), snap(2, 22.0, d2d_db=80.0, pckt=0.09)]
        out = run_selection_round(src, cands, SelectionMode.DUAL_HOP, OH, CFG, RADIO,
                                  contention=full_graph([0, 1, 2]), collect_events=True)
        # re-derive the books from the atomic event log
        data = math.fsum(e.energy_J for e in out.events if e.kind.startswith("data"))
        circ = math.fsum(e.energy_J for e in out.events if e.kind.startswith("circuit"))
        ovh = math.fsum(e.energy_J for e in out.events if not (e.kind.startswith("data") or e.kind.startswith("circuit")))
        assert out.breakdown.total_J == data + circ + ovh
        assert out.breakdown.data_tx_J == data and out.breakdown.overhead_J == ovh
        per_device = math.fsum(out.charges[d] for d in sorted(out.charges))
        assert per_device == pytest.approx(out.breakdown.total_J, rel=1e-14)

    def test_relayed_overhead_matches_decomposition(self):
        src = snap(0, 15.0)
        cands = [snap(1, 30.0, d2d_db=90.0), snap(2, 16.0, d2d_db=90.0), snap(3, 17.0, d2d_db=90.0)]
        oh = OverheadEnergies(11.6e-6, 4.5e-6, 3.35e-6, 1.3e-6, 2e-6, 3e-6, 4e-6)
        out = run_selection_round(src, cands, SelectionMode.SINGLE_HOP, oh, CFG, RADIO,
                                  contention=full_graph([0, 1, 2, 3]))
        assert out.path is Path.RELAYED
        assert out.breakdown.overhead_J == pytest.approx(oh.relay_total(3), rel=1e-12)

    def test_collision_falls_back_to_direct(self):
        src = snap(0, 15.0)
        cands = [snap(1, 25.0, d2d_db=90.0), snap(2, 25.0 + 1e-9, d2d_db=90.0)]
        cfg = BackoffConfig(0.01, 1e-3, 1e-5, collision_window_s=1e-6)
        out = run_selection_round(src, cands, SelectionMode.SINGLE_HOP, OH, cfg, RADIO,
                                  collect_events=True)
        assert out.path is Path.DIRECT
        assert out.reason is SelectionReason.CTR_COLLISION
        collided = [e for e in out.events if e.kind == "ctr_tx_collided"]
        assert len(collided) == 2
        assert {e.device_id for e in collided} == {1, 2}

    def test_collision_rate_monotone_in_window(self):
        rng = np.random.default_rng(5)
        rounds = []
        for _ in range(400):
            src = snap(0, float(rng.uniform(12, 30)))
            cands = [snap(i + 1, float(rng.uniform(12, 30)), d2d_db=80.0) for i in range(3)]
            rounds.append((src, cands))
        counts = []
        for w in (0.0, 1e-4, 1e-3):
            cfg = BackoffConfig(0.01, 1e-3, 1e-5, collision_window_s=w)
            n = sum(run_selection_round(s, c, SelectionMode.SINGLE_HOP, OH, cfg, RADIO).reason
                    is SelectionReason.CTR_COLLISION for s, c in rounds)
            counts.append(n)
        assert counts[0] == 0
        assert counts[0] <= counts[1] <= counts[2]

    def test_hidden_contender_sends_stray_ctr(self):
        src = snap(0, 15.0)
        cands = [snap(1, 30.0, d2d_db=90.0), snap(2, 25.0, d2d_db=90.0)]
        adj = {1: set(), 2: set()}  # mutually hidden
        out = run_selection_round(src, cands, SelectionMode.SINGLE_HOP, OH, CFG, RADIO,
                                  contention=adj, collect_events=True)
        strays = [e for e in out.events if e.kind == "ctr_tx_stray"]
        assert out.relay_id == 1
        assert len(strays) == 1 and strays[0].device_id == 2

    def test_stray_count_equals_hidden_contenders(self):
        rng = np.random.default_rng(8)
        for _ in range(300):
            k = int(rng.integers(2, 6))
            src = snap(0, float(rng.uniform(10, 25)))
            cands = [snap(i + 1, float(rng.uniform(10, 35)), d2d_db=80.0) for i in range(k)]
            adj = {c.device_id: set() for c in cands}
            for a in cands:
                for b in cands:
                    if a.device_id < b.device_id and rng.random() < 0.5:
                        adj[a.device_id].add(b.device_id)
                        adj[b.device_id].add(a.device_id)
            out = run_selection_round(src, cands, SelectionMode.SINGLE_HOP, OH, CFG, RADIO,
                                      contention=adj, collect_events=True)
            strays = sum(e.kind == "ctr_tx_stray" for e in out.events)
            if out.path is Path.RELAYED:
                deadline = backoff_map((0.2 + src.pckt_w) * transmission_time_s(
                    src.bs_snr.value_linear, 8192, 2e5), CFG) + CFG.tau_th_s
                expected = 0
                for c in cands:
                    if c.device_id == out.relay_id or c.device_id in adj[out.relay_id]:
                        continue
                    tau = backoff_map((0.2 + c.pckt_w) * transmission_time_s(
                        c.bs_snr.value_linear, 8192, 2e5), CFG)
                    expected += tau < deadline
                assert strays == expected
            else:
                assert strays == 0

    def test_latency_bounded_by_fallback(self):
        rng = np.random.default_rng(13)
        for _ in range(200):
            src = snap(0, float(rng.uniform(10, 30)))
            k = int(rng.integers(0, 4))
            cands = [snap(i + 1, float(rng.uniform(10, 30)), d2d_db=70.0) for i in range(k)]
            out = run_selection_round(src, cands, SelectionMode.SINGLE_HOP, OH, CFG, RADIO)
            tau_src = backoff_map((0.2 + src.pckt_w) * transmission_time_s(
                src.bs_snr.value_linear, 8192, 2e5), CFG)
            hops = transmission_time_s(src.bs_snr.value_linear, 8192, 2e5)
            if out.path is Path.RELAYED:
                win = next(c for c in cands if c.device_id == out.relay_id)
                hops = (transmission_time_s(win.d2d_snr.value_linear, 8192, 2e5)
                        + transmission_time_s(win.bs_snr.value_linear, 8192, 2e5))
            assert out.latency_s <= tau_src + CFG.tau_th_s + hops + 1e-15

    def test_threshold_excludes_candidates(self):
        src = snap(0, 20.0)
        cands = [snap(1, 28.0, d2d_db=90.0)]
        out = run_selection_round(src, cands, SelectionMode.SINGLE_HOP, OH, CFG, RADIO,
                                  gamma_th_db=29.0)
        assert out.path is Path.DIRECT
        assert out.reason is SelectionReason.NO_CANDIDATES

    def test_contract_violations(self):
        src = snap(0, 20.0)
        with pytest.raises(ValueError):
            run_selection_round(src, [snap(0, 22.0, d2d_db=80.0)], SelectionMode.SINGLE_HOP,
                                OH, CFG, RADIO)
        with pytest.raises(ValueError):
            run_selection_round(src, [snap(1, 22.0)], SelectionMode.SINGLE_HOP, OH, CFG, RADIO)

    def test_deterministic(self):
        src = snap(0, 18.0)
        cands = [snap(1, 24.0, d2d_db=85.0), snap(2, 22.0, d2d_db=80.0)]
        a = run_selection_round(src, cands, SelectionMode.DUAL_HOP, OH, CFG, RADIO)
        b = run_selection_round(src, cands, SelectionMode.DUAL_HOP, OH, CFG, RADIO)
        assert a.breakdown.total_J == b.breakdown.total_J and a.relay_id == b.relay_id
