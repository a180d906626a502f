"""Channel sampling: moments, distributions, determinism."""

import math

import numpy as np
import pytest
from scipy import stats

from d2dee.channel import (
    Hop,
    LognormalLinkParams,
    RayleighLinkParams,
    SnrSample,
    mean_snr_db,
    mean_snr_linear,
    sample_bs_snr,
    sample_bs_snr_db,
    sample_d2d_snr,
    sample_d2d_snr_linear,
)


def bs_params(distance=300.0, alpha=4.0, g_db=0.0, p_w=1.0, n0_w=1.0, sigma=4.0):
    return LognormalLinkParams(distance, alpha, g_db, p_w, n0_w, sigma)


class TestMeanSnr:
    def test_all_terms_vanish(self):
        assert mean_snr_db(bs_params(distance=1.0, g_db=0.0, p_w=1.0, n0_w=1.0)) == 0.0

    def test_three_term_sum(self):
        p = bs_params(distance=300.0, alpha=4.0, g_db=0.0, p_w=1e13, n0_w=1.0)
        assert mean_snr_db(p) == pytest.approx(130.0 - 40.0 * math.log10(300.0), rel=1e-14)

    def test_pathloss_slope(self):
        base = mean_snr_db(bs_params(distance=200.0))
        doubled = mean_snr_db(bs_params(distance=400.0))
        assert base - doubled == pytest.approx(40.0 * math.log10(2.0), rel=1e-12)

    def test_d2d_mean_linear_pathloss(self):
        p1 = RayleighLinkParams(20.0, 3.0, 0.2, 1e-15)
        p2 = RayleighLinkParams(40.0, 3.0, 0.2, 1e-15)
        assert mean_snr_linear(p1) / mean_snr_linear(p2) == pytest.approx(8.0, rel=1e-12)

    def test_invalid_params(self):
        with pytest.raises(ValueError):
            LognormalLinkParams(-1.0, 4.0, 0.0, 1.0, 1.0, 4.0)
        with pytest.raises(ValueError):
            RayleighLinkParams(10.0, 3.0, 0.0, 1.0)


class TestSnrSample:
    def test_db_linear_consistency(self):
        s = SnrSample.from_db(17.3, Hop.TO_BASE_STATION)
        assert s.consistent()
        assert s.value_linear == pytest.approx(10 ** 1.73, rel=1e-12)

    def test_from_linear(self):
        s = SnrSample.from_linear(100.0, Hop.DEVICE_TO_DEVICE)
        assert s.value_db == pytest.approx(20.0, rel=1e-12)
        assert s.hop is Hop.DEVICE_TO_DEVICE

    def test_nonpositive_linear_rejected(self):
        with pytest.raises(ValueError):
            SnrSample.from_linear(0.0, Hop.DEVICE_TO_DEVICE)


class TestShadowSampling:
    def test_degenerate_spread_is_deterministic(self):
        p = bs_params(sigma=0.0)
        rng = np.random.default_rng(0)
        s = sample_bs_snr(p, rng)
        assert s.value_db == mean_snr_db(p)
        assert s.hop is Hop.TO_BASE_STATION

    def test_moments_of_db_samples(self):
        p = bs_params(distance=1.0, p_w=100.0, n0_w=1.0, sigma=4.0)  # mean exactly 20 dB
        rng = np.random.default_rng(42)
        x = sample_bs_snr_db(p, rng, 10**6)
        assert x.mean() == pytest.approx(20.0, abs=0.02)
        assert x.var(ddof=1) == pytest.approx(16.0, abs=0.1)

    def test_ks_against_normal(self):
        p = bs_params(sigma=4.0)
        mu = mean_snr_db(p)
        rng = np.random.default_rng(7)
        x = sample_bs_snr_db(p, rng, 10**5)
        res = stats.kstest(x, "norm", args=(mu, 4.0))
        assert res.pvalue > 0.01


class TestRayleighSampling:
    def test_mean_linear(self):
        p = RayleighLinkParams(10.0, 3.0, 0.1, 1e-6)  # mean 100
        assert mean_snr_linear(p) == pytest.approx(100.0, rel=1e-12)
        rng = np.random.default_rng(3)
        g = sample_d2d_snr_linear(p, rng, 10**6)
        assert g.mean() == pytest.approx(100.0, abs=0.3)

    def test_tail_at_the_mean(self):
        p = RayleighLinkParams(10.0, 3.0, 0.1, 1e-6)
        rng = np.random.default_rng(4)
        g = sample_d2d_snr_linear(p, rng, 10**6)
        assert (g > 100.0).mean() == pytest.approx(math.exp(-1.0), abs=0.002)

    def test_ks_against_exponential(self):
        p = RayleighLinkParams(25.0, 3.0, 0.2, 1e-9)
        rng = np.random.default_rng(9)
        g = sample_d2d_snr_linear(p, rng, 10**5)
        res = stats.kstest(g, "expon", args=(0.0, mean_snr_linear(p)))
        assert res.pvalue > 0.01

    def test_scalar_sample_has_both_domains(self):
        p = RayleighLinkParams(25.0, 3.0, 0.2, 1e-9)
        s = sample_d2d_snr(p, np.random.default_rng(1))
        assert s.hop is Hop.DEVICE_TO_DEVICE
        assert s.consistent()


def test_same_seed_same_stream():
    p = bs_params()
    a = sample_bs_snr_db(p, np.random.default_rng(1234), 1000)
    b = sample_bs_snr_db(p, np.random.default_rng(1234), 1000)
    assert np.array_equal(a, b)
