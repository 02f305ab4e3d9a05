import numpy as np
import pytest
import scipy.integrate

from mimocap import channels, linalg, waterfill
from mimocap.waterfill import InfeasibleError

RAYLEIGH_M1 = channels.wishart_density(1, 1)
RAYLEIGH_M2 = channels.wishart_density(2, 2)

# two-mode closed form: mu = 1.25, powers (0.75, 0.25), rate ln 2.5 + ln 1.25
GOLDEN_TWO_MODE_RATE = float(np.log(2.5) + np.log(1.25))


class TestWaterfillDet:
    def test_single_mode(self):
        sol = waterfill.waterfill_det([1.0], 1.0)
        assert np.isclose(sol.level, 2.0)
        assert np.allclose(sol.powers, [1.0])
        assert np.isclose(sol.rate, np.log(2.0))

    def test_symmetric_modes(self):
        sol = waterfill.waterfill_det([1.0, 1.0], 2.0)
        assert np.isclose(sol.level, 2.0)
        assert np.allclose(sol.powers, [1.0, 1.0])
        assert np.isclose(sol.rate, 2 * np.log(2.0))

    def test_two_mode_golden_value(self):
        sol = waterfill.waterfill_det([2.0, 1.0], 1.0)
        assert np.isclose(sol.level, 1.25)
        assert np.allclose(sol.powers, [0.75, 0.25])
        assert np.isclose(sol.rate, GOLDEN_TWO_MODE_RATE, atol=1e-12)
        assert round(sol.rate, 4) == 1.1394

    def test_weak_mode_shut_off(self):
        sol = waterfill.waterfill_det([10.0, 0.01], 0.5)
        assert sol.active == 1
        assert sol.powers[1] == 0.0
        assert np.isclose(sol.powers.sum(), 0.5)

    def test_power_conservation_random(self):
        rng = np.random.default_rng(0)
        for _ in range(50):
            lam = rng.uniform(0.01, 5.0, size=rng.integers(1, 6))
            budget = rng.uniform(0.05, 10.0)
            sol = waterfill.waterfill_det(lam, budget)
            assert np.isclose(sol.powers.sum(), budget, rtol=1e-10)
            assert np.all(sol.powers >= 0)

    def test_local_optimality_under_perturbation(self):
        # moving budget between modes never increases the rate
        lam = np.array([2.0, 1.0, 0.5])
        sol = waterfill.waterfill_det(lam, 2.0)
        rng = np.random.default_rng(1)

        def rate(p):
            return np.sum(np.log1p(p * lam))

        base = rate(sol.powers)
        for _ in range(200):
            i, j = rng.choice(3, 2, replace=False)
            eps = min(sol.powers[i], 10 ** rng.uniform(-4, -1))
            p = sol.powers.copy()
            p[i] -= eps
            p[j] += eps
            assert rate(p) <= base + 1e-12

    def test_all_zero_eigenvalues_error(self):
        with pytest.raises(ValueError):
            waterfill.waterfill_det([0.0, 0.0], 1.0)


class TestSpaceTimeWaterLevel:
    def test_point_mass_reduces_to_deterministic(self):
        d = channels.PointMassDensity([1.0], [1.0], m=1)
        assert np.isclose(waterfill.st_water_level(d, 1.0), 2.0)

    def test_rayleigh_m1_closed_equation(self):
        # The power integral for f(lam)=exp(-lam) evaluates to
        # xi*exp(-1/xi) - Gamma(0, 1/xi); cross-check the derivation first.
        xi_probe = 2.0
        quad, _ = scipy.integrate.quad(
            lambda lam: (xi_probe - 1 / lam) * np.exp(-lam), 1 / xi_probe, np.inf)
        closed = xi_probe * np.exp(-1 / xi_probe) - linalg.expint_gamma0(1 / xi_probe)
        assert np.isclose(quad, closed, atol=1e-10)
        for budget in (0.1, 1.0, 10.0):
            xi = waterfill.st_water_level(RAYLEIGH_M1, budget)
            resid = xi * np.exp(-1 / xi) - linalg.expint_gamma0(1 / xi) - budget
            assert abs(resid) <= 1e-8

    def test_rayleigh_m2_closed_equation(self):
        for budget in (0.1, 1.0, 10.0):
            xi = waterfill.st_water_level(RAYLEIGH_M2, budget)
            resid = np.exp(-1 / xi) * (2 * xi + 1) \
                - 2 * linalg.expint_gamma0(1 / xi) - budget
            assert abs(resid) <= 1e-8

    def test_residual_monotone_in_xi(self):
        xis = np.linspace(0.5, 8.0, 30)
        powers = [RAYLEIGH_M2.trunc_moment(lambda lam: x - 1 / lam, 1 / x)
                  for x in xis]
        assert np.all(np.diff(powers) > 0)

    def test_no_mass_raises(self):
        d = channels.PointMassDensity([0.0], [1.0], m=1)
        with pytest.raises(InfeasibleError):
            waterfill.st_water_level(d, 1.0)


class TestSpaceTimeCapacity:
    def test_point_mass(self):
        d = channels.PointMassDensity([1.0], [1.0], m=1)
        assert np.isclose(waterfill.st_capacity(d, 2.0), np.log(2.0))

    def test_onoff_closed_form(self):
        m, p, budget = 4, 0.3, 2.0
        d = channels.onoff_density(m, p)
        xi = waterfill.st_water_level(d, budget)
        cap = waterfill.st_capacity(d, xi)
        assert abs(cap - m * p * np.log(1 + budget / (m * p))) <= 1e-9

    def test_empirical_matches_closed_form(self):
        law = channels.KroneckerGaussian(np.zeros((1, 1)), np.eye(1), np.eye(1))
        emp = channels.empirical_density(law, 1_000_000, np.random.default_rng(2))
        xi_emp = waterfill.st_water_level(emp, 1.0)
        xi_cf = waterfill.st_water_level(RAYLEIGH_M1, 1.0)
        c_emp = waterfill.st_capacity(emp, xi_emp)
        c_cf = waterfill.st_capacity(RAYLEIGH_M1, xi_cf)
        assert abs(c_emp - c_cf) < 1e-2


class TestInstantaneousCovariance:
    def test_zero_channel(self):
        assert np.allclose(waterfill.instantaneous_covariance(np.zeros((2, 2)), 2.0), 0)

    def test_identity_channel(self):
        q = waterfill.instantaneous_covariance(np.eye(2), 2.0)
        assert np.allclose(q, np.eye(2))

    def test_matches_two_mode_waterfill(self):
        rng = np.random.default_rng(3)
        u = linalg.haar_unitary(2, rng)
        v = linalg.haar_unitary(2, rng)
        h = (u * [np.sqrt(2.0), 1.0]) @ v
        q = waterfill.instantaneous_covariance(h, 1.25)
        eigs = np.sort(np.linalg.eigvalsh(q))[::-1]
        assert np.allclose(eigs, [0.75, 0.25], atol=1e-10)

    def test_average_power_meets_budget(self):
        law = channels.KroneckerGaussian(np.zeros((2, 2)), np.eye(2), np.eye(2))
        budget = 1.0
        xi = waterfill.st_water_level(RAYLEIGH_M2, budget)
        h = channels.sample_batch(law, 100_000, np.random.default_rng(4))
        s = np.linalg.svd(h, compute_uv=False)
        lam = s**2
        powers = np.maximum(xi - 1 / np.maximum(lam, 1e-300), 0.0).sum(axis=1)
        se = powers.std(ddof=1) / np.sqrt(powers.size)
        assert abs(powers.mean() - budget) <= 3 * se
        # spot check: the vectorized powers agree with the covariance trace
        for hk in h[:50]:
            q = waterfill.instantaneous_covariance(hk, xi)
            sk = np.linalg.svd(hk, compute_uv=False)
            expect = np.maximum(xi - 1 / sk**2, 0.0).sum()
            assert np.isclose(np.trace(q).real, expect, atol=1e-10)


class TestNaiveBaseline:
    def test_point_mass_law_equals_space_time(self):
        law = channels.PointMass(np.diag([np.sqrt(2.0), 1.0]))
        d = channels.empirical_density(law, 1000, np.random.default_rng(5))
        xi = waterfill.st_water_level(d, 1.0)
        st = waterfill.st_capacity(d, xi)
        assert np.isclose(waterfill.naive_avg_rate(law, 1.0), st, atol=1e-12)
        assert np.isclose(waterfill.naive_avg_rate(d, 1.0), st, atol=1e-12)

    def test_two_point_mixture_closed_form(self):
        eps, gamma = 1e-4, 10.0
        law = channels.FiniteMixture(
            [0.5, 0.5], [np.array([[eps]]), np.array([[1.0]])])
        expect = 0.5 * np.log1p(gamma * eps**2) + 0.5 * np.log1p(gamma)
        assert np.isclose(waterfill.naive_avg_rate(law, gamma), expect, atol=1e-12)

    def test_factor_two_gap_at_low_snr(self):
        # concentrating power in live slots doubles the rate as budget -> 0
        eps = 1e-4
        law = channels.FiniteMixture(
            [0.5, 0.5], [np.array([[eps]]), np.array([[1.0]])])
        d = channels.empirical_density(law, 1000, np.random.default_rng(6))
        gamma = 0.01
        xi = waterfill.st_water_level(d, gamma)
        st = waterfill.st_capacity(d, xi)
        naive = waterfill.naive_avg_rate(law, gamma)
        assert 1.98 <= st / naive <= 2.00

    def test_space_time_dominates_naive(self):
        cases = [
            (RAYLEIGH_M1, 1.0),
            (RAYLEIGH_M2, 0.5),
            (channels.onoff_density(2, 0.4), 1.0),
        ]
        for dens, budget in cases:
            xi = waterfill.st_water_level(dens, budget)
            st = waterfill.st_capacity(dens, xi)
            naive = waterfill.naive_avg_rate(dens, budget, samples=40_000, rng=7)
            assert st >= naive - 1e-3

    def test_onoff_enumeration(self):
        # E[k ln(1 + P/k)], k ~ Binomial(m, p): exact enumeration oracle
        from math import comb
        m, p, budget = 3, 0.4, 2.0
        d = channels.onoff_density(m, p)
        expect = sum(comb(m, k) * p**k * (1 - p) ** (m - k)
                     * (k * np.log1p(budget / k) if k else 0.0)
                     for k in range(m + 1))
        assert np.isclose(waterfill.naive_avg_rate(d, budget), expect, atol=1e-12)


class TestPapr:
    def test_point_mass_tight(self):
        d = channels.PointMassDensity([1.0], [1.0], m=1)
        xi = waterfill.st_water_level(d, 1.0)
        assert np.isclose(waterfill.papr(xi, 1.0, 1), 2.0)
        assert np.isclose(waterfill.papr_bound(d, 1.0), 2.0)

    def test_square_rayleigh_bound_diverges(self):
        assert waterfill.papr_bound(RAYLEIGH_M1, 1.0) == np.inf
        assert waterfill.papr_bound(RAYLEIGH_M2, 1.0) == np.inf

    def test_bound_dominates_exact_on_shifted_support(self):
        # all eigenvalues in [1, 2]: E[1/lam] = 0.5/1 + 0.5/2 = 0.75 exactly
        d = channels.PointMassDensity([1.0, 2.0], [0.5, 0.5], m=1)
        budget = 1.0
        xi = waterfill.st_water_level(d, budget)
        bound = waterfill.papr_bound(d, budget)
        assert np.isclose(bound, 1.0 + 0.75)
        assert waterfill.papr(xi, budget, 1) <= bound

    def test_rectangular_wishart_bound_finite(self):
        d = channels.wishart_density(2, 4)
        bound = waterfill.papr_bound(d, 1.0)
        oracle, _ = scipy.integrate.quad(lambda lam: d.pdf(lam) / lam, 0, np.inf,
                                         limit=300)
        assert np.isfinite(bound)
        assert np.isclose(bound, 1.0 + 2 * oracle, rtol=1e-6)


class TestPowerDensity:
    def test_point_mass_above_threshold(self):
        d = channels.PointMassDensity([2.0], [1.0], m=1)
        pd = waterfill.power_density(d, 2.0, [0.5, 1.0])
        assert pd.atom0 == 0.0
        assert len(pd.atoms) == 1
        power, weight = pd.atoms[0]
        assert np.isclose(power, 2.0 - 0.5) and weight == 1.0

    def test_point_mass_below_threshold(self):
        d = channels.PointMassDensity([0.1], [1.0], m=1)
        pd = waterfill.power_density(d, 2.0, [1.0])
        assert pd.atom0 == 1.0 and not pd.atoms

    def test_total_mass_rayleigh(self):
        for budget in (0.5, 2.0):
            xi = waterfill.st_water_level(RAYLEIGH_M2, budget)
            grid = np.linspace(xi * 1e-3, xi * 0.99, 50)
            pd = waterfill.power_density(RAYLEIGH_M2, xi, grid)
            assert abs(pd.total_mass() - 1.0) <= 1e-6

    def test_concentration_at_high_snr(self):
        # mass within +-25% of the per-mode budget grows with SNR
        def mass_near_target(budget):
            xi = waterfill.st_water_level(RAYLEIGH_M2, budget)
            target = budget / 2
            lo = 1 / (xi - 0.75 * target)
            hi = 1 / (xi - 1.25 * target)
            ones = lambda lam: np.ones_like(lam)
            return RAYLEIGH_M2.trunc_moment(ones, lo) - RAYLEIGH_M2.trunc_moment(ones, hi)

        low = mass_near_target(10 ** (-0.5))
        high = mass_near_target(10 ** (1.0))
        assert high > low

    def test_grid_validation(self):
        with pytest.raises(ValueError):
            waterfill.power_density(RAYLEIGH_M2, 2.0, [2.5])


class TestPeakLimitedRate:
    def test_loose_cap_is_unconstrained(self):
        xi_unc = waterfill.st_water_level(RAYLEIGH_M2, 1.0)
        xi, rate = waterfill.peak_limited_rate(RAYLEIGH_M2, 1.0, xi_unc + 1.0)
        assert xi == xi_unc
        assert np.isclose(rate, waterfill.st_capacity(RAYLEIGH_M2, xi_unc))

    def test_binding_cap_reduces_rate(self):
        xi_unc = waterfill.st_water_level(RAYLEIGH_M1, 1.0)
        c_unc = waterfill.st_capacity(RAYLEIGH_M1, xi_unc)
        xi, rate = waterfill.peak_limited_rate(RAYLEIGH_M1, 1.0, 0.97 * xi_unc)
        assert xi > xi_unc
        assert 0.0 < rate < c_unc

    def test_tight_cap_infeasible(self):
        # power stays strictly below the cap on a window of probability < 1,
        # so budget = cap can never be met for a continuous density
        with pytest.raises(InfeasibleError):
            waterfill.peak_limited_rate(RAYLEIGH_M1, 1.0, 1.0)

    def test_rate_vanishes_with_cap_and_budget(self):
        # a shrinking cap shrinks what can be spent at all; rates follow it down
        def max_spendable(peak):
            best = 0.0
            for xi in np.geomspace(0.05, 50.0, 200):
                upper = np.inf if xi <= peak else 1.0 / (xi - peak)
                full = RAYLEIGH_M1.trunc_moment(lambda lam: xi - 1 / lam, 1 / xi)
                tail = 0.0 if not np.isfinite(upper) else \
                    RAYLEIGH_M1.trunc_moment(lambda lam: xi - 1 / lam, upper)
                best = max(best, full - tail)
            return best

        rates = []
        for peak in (0.4, 0.2, 0.1):
            budget = 0.4 * max_spendable(peak)
            xi, rate = waterfill.peak_limited_rate(RAYLEIGH_M1, budget, peak)
            rates.append(rate)
        assert rates[0] > rates[1] > rates[2] > 0
        assert rates[2] < 0.02

    def test_cap_validation(self):
        with pytest.raises(ValueError):
            waterfill.peak_limited_rate(RAYLEIGH_M1, 1.0, 0.0)
