import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import integrate

from joint_srukf.prior import (
    HorseshoeSpec,
    LaplaceParams,
    density_comparison,
    gaussian_pdf,
    laplace_pdf,
    regularized_lambda,
    sample_half_cauchy,
    sample_inv_gamma,
    sample_sigma2,
    sigma_star,
)

# frozen output of tests/oracles/horseshoe_oracle.py (2-D quadrature)
QUADRATURE = {0.1: 0.0833898803959899, 0.01: 0.01690659413209816}

pos = st.floats(1e-3, 1e3)
nonneg = st.floats(0.0, 1e3)


class TestLaplace:
    def test_peak(self):
        assert laplace_pdf(LaplaceParams(0.0, 1.0), 0.0) == 0.5

    def test_variance_convention(self):
        p = LaplaceParams.from_variance(0.75)
        assert p.sigma == pytest.approx(np.sqrt(0.375), rel=1e-15)
        assert laplace_pdf(p, 0.0) == pytest.approx(0.816496580927726, rel=1e-12)

    def test_shifted(self):
        assert laplace_pdf(LaplaceParams(1.0, 2.0), 3.0) == pytest.approx(0.25 * np.exp(-1.0), rel=1e-15)

    @given(mu=st.floats(-2, 2), sigma=st.floats(0.1, 3.0))
    def test_normalized(self, mu, sigma):
        t = np.linspace(mu - 60 * sigma, mu + 60 * sigma, 400001)
        area = integrate.trapezoid(laplace_pdf(LaplaceParams(mu, sigma), t), t)
        assert abs(area - 1.0) < 1e-6

    def test_sigma_positive(self):
        with pytest.raises(ValueError):
            LaplaceParams(0.0, 0.0)


class TestRegularizedLambda:
    def test_tau_zero(self):
        assert regularized_lambda(1.7, 3.2, 0.0) == 3.2

    def test_hand_value(self):
        assert regularized_lambda(2.0, 1.0, 1.0) == pytest.approx(2.0 / np.sqrt(5.0), rel=1e-15)

    def test_saturation(self):
        assert regularized_lambda(1.0, np.inf, 0.5) == 2.0
        assert regularized_lambda(1.0, 1e12, 0.5) == pytest.approx(2.0, rel=1e-12)

    @given(c=pos, lam=nonneg, tau=pos)
    def test_bounds(self, c, lam, tau):
        v = regularized_lambda(c, lam, tau)
        assert 0.0 <= v <= min(lam, c / tau) * (1 + 1e-12)

    @given(c=pos, lam=nonneg, d=st.floats(0.0, 10.0), tau=pos)
    def test_monotone(self, c, lam, d, tau):
        assert regularized_lambda(c, lam + d, tau) >= regularized_lambda(c, lam, tau) * (1 - 1e-12)

    def test_c_positive(self):
        with pytest.raises(ValueError):
            regularized_lambda(0.0, 1.0, 1.0)


class TestSamplers:
    def test_half_cauchy_median(self):
        x = sample_half_cauchy(0.3, 10**6, np.random.default_rng(0))
        assert np.all(x >= 0)
        assert abs(np.mean(x <= 0.3) - 0.5) < 0.01

    def test_inv_gamma_mean(self):
        x = sample_inv_gamma(4.5, 1.5, 10**6, np.random.default_rng(1))
        assert np.mean(x) == pytest.approx(1.5 / 3.5, rel=0.01)

    @given(seed=st.integers(0, 2**32))
    def test_sigma2_inside_bounds(self, seed):
        spec = HorseshoeSpec()
        s = sample_sigma2(spec, np.random.default_rng(seed), 2000)
        # the same stream consumed in the same order gives the c^2 draws
        rng = np.random.default_rng(seed)
        sample_half_cauchy(1.0, 2000, rng)
        sample_half_cauchy(spec.tau0, 2000, rng)
        c2 = sample_inv_gamma(spec.a, spec.b, 2000, rng)
        assert np.all(s > 0)
        assert np.all(s < c2)

    def test_median_reproducible(self):
        a = np.median(sample_sigma2(HorseshoeSpec(), np.random.default_rng(5), 10**6))
        b = np.median(sample_sigma2(HorseshoeSpec(), np.random.default_rng(5), 10**6))
        assert a == b

    def test_spec_validation(self):
        with pytest.raises(ValueError):
            HorseshoeSpec(tau0=0.0)
        with pytest.raises(ValueError):
            HorseshoeSpec(xi=(1.0, -1.0))
        np.testing.assert_array_equal(HorseshoeSpec(xi=2.0).scales(3), [2.0, 2.0, 2.0])


class TestSigmaStar:
    @pytest.mark.parametrize("tau0", [0.1, 0.01])
    def test_matches_quadrature(self, tau0):
        est = sigma_star(HorseshoeSpec(tau0=tau0), 10**6, seed=0)
        assert abs(est.value - QUADRATURE[tau0]) < 3 * est.stderr

    def test_global_shrinkage_limit(self):
        values = [sigma_star(HorseshoeSpec(tau0=t), 10**5, 0).value for t in (1e-1, 1e-3, 1e-6)]
        assert values[0] > values[1] > values[2]
        assert values[2] < 1e-5

    def test_deterministic(self):
        a = sigma_star(HorseshoeSpec(), 300_000, seed=9, chunk_size=100_000)
        b = sigma_star(HorseshoeSpec(), 300_000, seed=9, chunk_size=100_000)
        assert a == b

    def test_stderr_rate(self):
        a = sigma_star(HorseshoeSpec(), 10**6, seed=2, chunk_size=10**5)
        b = sigma_star(HorseshoeSpec(), 2 * 10**6, seed=2, chunk_size=10**5)
        assert b.stderr / a.stderr == pytest.approx(1 / np.sqrt(2), rel=0.1)

    def test_prefix_reuses_draws(self):
        spec = HorseshoeSpec()
        one = sigma_star(spec, 10**5, seed=4, chunk_size=10**5)
        draws = sample_sigma2(spec, np.random.default_rng(np.random.SeedSequence(4).spawn(1)[0]), 10**5)
        assert one.value == pytest.approx(np.mean(draws), rel=1e-13)

    def test_independent_seeds_agree(self):
        ests = [sigma_star(HorseshoeSpec(), 10**6, seed=s) for s in (10, 11, 12)]
        for a in ests:
            for b in ests:
                assert abs(a.value - b.value) <= 3 * np.hypot(a.stderr, b.stderr)

    def test_n_samples_positive(self):
        with pytest.raises(ValueError):
            sigma_star(HorseshoeSpec(), 0)


class TestDensityComparison:
    def test_conventions(self):
        grid = np.array([0.0, 1.0])
        h1, d = density_comparison(grid, convention="distribution")
        h2, s = density_comparison(grid, convention="scale")
        assert h1 == h2 == ["t", "laplace"] + [f"gauss_var_{v:g}" for v in (1, 0.9, 0.8, 0.75, 0.7, 0.65)]
        assert d[0, 1] == pytest.approx(1 / (2 * np.sqrt(0.375)), rel=1e-14)
        assert s[0, 1] == pytest.approx(1 / (2 * np.sqrt(0.75)), rel=1e-14)
        np.testing.assert_allclose(d[:, 2], gaussian_pdf(grid, 1.0), rtol=1e-15)
        np.testing.assert_array_equal(d[:, 2:], s[:, 2:])

    def test_unknown_convention(self):
        with pytest.raises(ValueError):
            density_comparison(convention="other")
