import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate

from d2dcost import analytic
from d2dcost.analytic import (binomial_pmf, d2d_download_probability, download_cost,
                              expected_repairs, hypoexp_mean, hypoexp_pdf, limit_delta_infinity,
                              limit_delta_zero, repair_cost, total_cost, wrapped_erlang_pdf)
from d2dcost.model import make_mbr, make_mds, make_replication, reference_network

import oracles

MU = 50.0


# Frozen Monte Carlo oracle values, regenerated by `python tests/oracles.py`:
# (estimate, standard error)
REPAIR_MDS_01 = (475.4875, 0.7339)          # 400k intervals, seed 11
D2D_FRACTION_10_2_05 = (0.99981062, 1.021e-5)  # 400k passage times, seed 12
SINGLE_NODE_1 = (0.63146, 7.63e-4)          # 400k trials, seed 13
SIM_DOWNLOAD_MDS_05 = (51.6165, 0.9685)     # simulator, 200k intervals, seed 14, 95% half-width


class TestBinomial:
    def test_degenerate(self):
        assert binomial_pmf(0, 10, 1.0) == 0.0
        assert binomial_pmf(10, 10, 1.0) == 1.0

    def test_half(self):
        assert binomial_pmf(1, 10, 0.5) == pytest.approx(10 / 1024, rel=1e-14)

    @pytest.mark.parametrize("args", [(-1, 10, 0.5), (11, 10, 0.5), (1, 10, 1.5)])
    def test_rejects(self, args):
        with pytest.raises(ValueError):
            binomial_pmf(*args)

    def test_sums_to_one(self):
        assert math.fsum(binomial_pmf(i, 17, 0.3) for i in range(18)) == pytest.approx(1, abs=1e-14)


class TestExpectedRepairs:
    def test_no_time_no_repairs(self):
        s = expected_repairs(10, 2, MU, 0.0)
        assert (s.d2d, s.bs) == (0.0, 0.0)

    def test_infinite_interval_all_bs(self):
        s = expected_repairs(10, 2, MU, math.inf)
        assert (s.d2d, s.bs) == (0.0, 10.0)

    def test_half_survival(self):
        s = expected_repairs(10, 2, MU, math.log(2) / MU)
        # bs = 10 * 2^-10 + 9 * 10 * 2^-10
        assert s.bs == pytest.approx(100 / 1024, rel=1e-12)
        assert s.d2d == pytest.approx(5 - 100 / 1024, rel=1e-12)
        assert s.total == pytest.approx(5, rel=1e-12)

    @given(n=st.integers(1, 20), data=st.data(), x=st.floats(0.01, 5))
    def test_telescoping(self, n, data, x):
        r = data.draw(st.integers(1, n))
        s = expected_repairs(n, r, MU, x / MU)
        assert abs(s.d2d + s.bs - n * (1 - math.exp(-x))) <= 1e-12


class TestRepairCost:
    def test_vanishes_for_long_intervals(self, params):
        code = make_mds(10, 2)
        bound = code.n * params.rho_bs * code.gamma_bs / params.M
        for x in (1e3, 1e5):
            assert 0 <= repair_cost(code, params, x / MU) <= bound * MU / x

    def test_small_interval_limit(self, params):
        code = make_replication(5)
        assert repair_cost(code, params, 1e-9 / MU) == pytest.approx(250, rel=1e-6)

    def test_matches_monte_carlo(self, params):
        mean, se = REPAIR_MDS_01
        value = repair_cost(make_mds(10, 2), params, 0.1 / MU)
        assert abs(value - mean) < 4 * se

    def test_zero_delta_is_signalled(self, params):
        with pytest.raises(ZeroDivisionError):
            repair_cost(make_mds(10, 2), params, 0.0)


class TestDownloadProbability:
    def test_tiny_interval(self):
        assert d2d_download_probability(10, 2, MU, 1e-8 / MU) > 1 - 1e-6

    def test_single_node(self):
        assert d2d_download_probability(1, 1, 1.0, 1.0) == pytest.approx(1 - math.exp(-1), rel=1e-14)
        mean, se = SINGLE_NODE_1
        assert abs(d2d_download_probability(1, 1, 1.0, 1.0) - mean) < 4 * se

    def test_matches_death_process_monte_carlo(self):
        mean, se = D2D_FRACTION_10_2_05
        assert abs(d2d_download_probability(10, 2, MU, 0.5 / MU) - mean) < 4 * se

    @pytest.mark.parametrize("n, h", [(10, 2), (10, 3), (5, 1), (20, 1), (12, 12)])
    def test_range_and_monotone(self, n, h):
        grid = np.geomspace(1e-6, 50, 200) / MU
        values = [d2d_download_probability(n, h, MU, d) for d in grid]
        assert all(0 <= v <= 1 for v in values)
        assert all(b <= a + 1e-15 for a, b in zip(values, values[1:]))

    def test_rejects_bad_access(self):
        with pytest.raises(ValueError):
            d2d_download_probability(5, 6, MU, 1.0)


class TestDownloadCost:
    def test_limits(self, params):
        code = make_mds(10, 2)
        d2d = params.N * params.omega * params.rho_d2d * code.h * code.alpha / params.M
        assert download_cost(code, params, 1e-9 / MU) == pytest.approx(d2d, rel=1e-9)
        assert download_cost(code, params, 1e6 / MU) == pytest.approx(
            params.N * params.omega * params.rho_bs, rel=1e-5)

    def test_matches_simulator(self, params):
        mean, hw = SIM_DOWNLOAD_MDS_05
        value = download_cost(make_mds(10, 2), params, 0.5 / MU)
        assert abs(value - mean) < 3 * hw

    @given(x=st.floats(1e-4, 100), rho=st.floats(1, 1000))
    @settings(max_examples=50)
    def test_between_d2d_and_bs(self, x, rho):
        p = reference_network(rho_bs=rho)
        for code in (make_mds(10, 2), make_mbr(10, 3, 9), make_replication(5)):
            low = p.N * p.omega * p.rho_d2d * code.h * code.alpha / p.M
            high = p.N * p.omega * p.rho_bs
            if low > high:
                continue
            value = download_cost(code, p, x / MU)
            assert low * (1 - 1e-12) <= value <= high * (1 + 1e-12)


class TestLimits:
    def test_delta_zero_examples(self, params):
        assert limit_delta_zero(make_replication(5), params).normalized_total == pytest.approx(0.03, rel=1e-14)
        assert limit_delta_zero(make_mds(10, 2), params).normalized_total == pytest.approx(0.055, rel=1e-14)
        zero = total_cost(make_mds(10, 2), params, 0.0)
        assert zero == limit_delta_zero(make_mds(10, 2), params)

    def test_delta_zero_split(self, params):
        b = limit_delta_zero(make_replication(5), params)
        assert (b.repair, b.download) == (250.0, 50.0)

    def test_delta_infinity(self, params):
        assert limit_delta_infinity(params) == 10000.0
        assert limit_delta_infinity(reference_network(omega=0.0)) == 0.0
        assert limit_delta_infinity(reference_network(N=1, omega=1, rho_bs=1, rho_d2d=1)) == 1.0
        with pytest.raises(ValueError):
            limit_delta_infinity(reference_network(mu=0.0))
        assert total_cost(make_mds(10, 2), params, math.inf).normalized_total == 1.0

    def test_breakdown_adds_up(self, params, codes):
        for code in codes:
            for x in (0.01, 0.3, 2.0):
                b = total_cost(code, params, x / MU)
                assert b.total == b.repair + b.download
                assert b.normalized_total == pytest.approx(b.total / 10000, rel=1e-15)
                assert b.repair >= 0 and b.download >= 0

    def test_approach_to_bs_cost_is_algebraic(self, params, codes):
        # repair and the residual D2D saving both fall off like 1/delta
        for code in codes:
            gaps = [(total_cost(code, params, x / MU).normalized_total - 1) * x
                    for x in (1e3, 1e4, 1e5)]
            assert gaps[0] > 0
            assert gaps[2] == pytest.approx(gaps[1], rel=1e-2)
            assert abs(total_cost(code, params, 1e4 / MU).normalized_total - 1) < 1e-3


class TestHypoexponential:
    def test_single_stage(self):
        for t in (0.0, 0.01, 0.1):
            assert hypoexp_pdf(4, 4, MU, t) == pytest.approx(4 * MU * math.exp(-4 * MU * t), rel=1e-14)

    def test_normalization_and_mean(self):
        mass, _ = integrate.quad(lambda t: hypoexp_pdf(10, 2, MU, t), 0, math.inf,
                                 epsabs=1e-12, epsrel=1e-12, limit=200)
        mean, _ = integrate.quad(lambda t: t * hypoexp_pdf(10, 2, MU, t), 0, math.inf,
                                 epsabs=1e-12, epsrel=1e-12, limit=200)
        assert mass == pytest.approx(1, abs=1e-6)
        assert mean == pytest.approx(sum(1 / (i * MU) for i in range(2, 11)), abs=1e-6)

    def test_nonnegative_on_grid(self):
        for n in range(1, 13):
            for h in range(1, n + 1):
                top = 20 * hypoexp_mean(n, h, MU)
                assert min(hypoexp_pdf(n, h, MU, t) for t in np.linspace(0, top, 10_000)) >= 0

    def test_matches_sampled_passage_time(self):
        # histogram of summed exponential stages against the density
        rng = np.random.default_rng(3)
        rates = MU * np.arange(3, 9)
        samples = rng.exponential(1 / rates, size=(200_000, rates.size)).sum(axis=1)
        edges = np.linspace(0, 0.15, 31)
        counts, _ = np.histogram(samples, edges)
        for lo, hi, c in zip(edges, edges[1:], counts):
            p, _ = integrate.quad(lambda t: hypoexp_pdf(8, 3, MU, t), lo, hi)
            assert abs(c / 200_000 - p) < 5 * math.sqrt(p * (1 - p) / 200_000) + 1e-9

    def test_eq17_is_time_average_of_survival(self):
        for n, h, x in [(10, 2, 0.5), (10, 3, 1.0), (5, 1, 0.2), (12, 7, 2.5)]:
            delta = x / MU
            survival = lambda t: 1 - integrate.quad(lambda s: hypoexp_pdf(n, h, MU, s), 0, t,
                                                    epsabs=1e-14, epsrel=1e-13, limit=200)[0]
            avg = integrate.quad(survival, 0, delta, epsabs=1e-14, epsrel=1e-13)[0] / delta
            assert d2d_download_probability(n, h, MU, delta) == pytest.approx(avg, abs=1e-8)


class TestWrappedErlang:
    def test_first_arrival_closed_form(self):
        omega, delta = 50.0, 0.02
        for t in np.linspace(0, delta, 101)[:-1]:
            expected = omega * math.exp(-omega * t) / -math.expm1(-omega * delta)
            assert abs(wrapped_erlang_pdf(1, omega, delta, t) - expected) < 1e-12

    def test_integrates_to_one(self):
        mass, _ = integrate.quad(lambda t: wrapped_erlang_pdf(5, 50.0, 0.02, t), 0, 0.02,
                                 epsabs=1e-13, epsrel=1e-13)
        assert mass == pytest.approx(1, abs=1e-9)

    def test_flattens_with_more_arrivals(self):
        t = np.linspace(0, 0.02, 401)[:-1]
        dev = [max(abs(wrapped_erlang_pdf(l, 50.0, 0.02, x) - 50.0) for x in t)
               for l in (1, 2, 4, 8, 16, 32)]
        assert all(b < a for a, b in zip(dev, dev[1:]))
        assert dev[-1] < 1e-9

    def test_matches_sampled_residues(self):
        rng = np.random.default_rng(5)
        w = rng.exponential(1 / 50.0, size=(100_000, 3)).sum(axis=1) % 0.02
        counts, edges = np.histogram(w, np.linspace(0, 0.02, 21))
        for lo, hi, c in zip(edges, edges[1:], counts):
            p, _ = integrate.quad(lambda t: wrapped_erlang_pdf(3, 50.0, 0.02, t), lo, hi)
            assert abs(c / 100_000 - p) < 5 * math.sqrt(p * (1 - p) / 100_000)

    @pytest.mark.parametrize("args", [(0, 1.0, 1.0, 0.5), (2, 1.0, 1.0, 1.0), (2, 1.0, 1.0, -0.1)])
    def test_rejects(self, args):
        with pytest.raises(ValueError):
            wrapped_erlang_pdf(*args)


def test_instability_is_reported(monkeypatch):
    monkeypatch.setattr(analytic, "_stage_weights", lambda n, h: (300, 0))
    with pytest.raises(analytic.NumericalInstabilityError):
        d2d_download_probability(3, 2, MU, 1.0)


def test_oracle_constants_reproduce():
    mean, se = oracles.d2d_fraction_mc(10, 2, MU, 0.5 / MU, 400_000, 12)
    assert (round(mean, 8), round(se, 8)) == (round(D2D_FRACTION_10_2_05[0], 8), 1.021e-5)
