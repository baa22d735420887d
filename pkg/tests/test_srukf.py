import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from joint_srukf.errors import ScaleFloorViolation
from joint_srukf.linalg import is_sqrt_factor
from joint_srukf.models import JointState, duffing_joint_model
from joint_srukf.srukf import (
    FilterState,
    JointSRUKF,
    PseudoMeasurement,
    UTParams,
    h_pm,
    joint_filter_step,
    merge_passes,
    sigma_points,
    srukf_step,
    unscented_moments,
    ut_weights,
)
from oracles.kalman import kalman_filter, random_linear_system, simulate

seeds = st.integers(0, 2**32 - 1)


def mean_error(m, ref, P):
    return np.linalg.norm(m - ref) / (np.linalg.norm(ref) + np.sqrt(np.trace(P)))


class TestWeights:
    @given(alpha=st.floats(1e-3, 1.0), beta=st.floats(0, 3), n=st.integers(1, 15), k=st.floats(0, 5))
    def test_mean_weights_sum_to_one(self, alpha, beta, n, k):
        wm, wc = ut_weights(UTParams(alpha, beta, k, n))
        assert np.sum(wm) == pytest.approx(1.0, abs=1e-9 * max(1.0, np.max(np.abs(wm))))
        np.testing.assert_array_equal(wm[1:], wc[1:])

    def test_hand_weights(self):
        wm, wc = ut_weights(UTParams(1.0, 0.0, 2.0, 1))
        np.testing.assert_allclose(wm, [2 / 3, 1 / 6, 1 / 6], rtol=1e-15)
        np.testing.assert_allclose(wc, wm, rtol=1e-15)

    def test_joint_kappa(self):
        p = UTParams(1e-3, 2.0, 3.0 - 11, 11)
        assert p.kappa == -8.0
        assert p.lam == pytest.approx(1e-6 * 3 - 11, rel=1e-15)
        assert p.scale == pytest.approx(3e-6, rel=1e-9)

    def test_scale_floor(self):
        p = UTParams(1e-3, 2.0, 3 * 1e-4 - 11, 11)
        with pytest.raises(ScaleFloorViolation):
            ut_weights(p)
        wm, _ = ut_weights(p, clamp=True)
        assert wm[1] == pytest.approx(0.5 / 1e-8)

    def test_alpha_range(self):
        with pytest.raises(ValueError):
            UTParams(0.0, 2.0, 0.0, 2)


class TestSigmaPoints:
    def test_zero_factor(self):
        X = sigma_points(np.array([1.0, -2.0]), np.zeros((2, 2)), UTParams(1.0, 0.0, 1.0, 2))
        np.testing.assert_array_equal(X, np.tile([[1.0], [-2.0]], 5))

    def test_hand_points(self):
        X = sigma_points(np.zeros(1), np.eye(1), UTParams(1.0, 0.0, 2.0, 1))
        np.testing.assert_allclose(X, [[0.0, np.sqrt(3.0), -np.sqrt(3.0)]], rtol=1e-15)

    @given(seed=seeds, n=st.integers(1, 8))
    def test_weighted_mean(self, seed, n):
        rng = np.random.default_rng(seed)
        m = rng.standard_normal(n)
        S = np.tril(rng.standard_normal((n, n)))
        p = UTParams(rng.uniform(0.1, 1.0), 2.0, 3.0 - n, n)
        wm, _ = ut_weights(p)
        np.testing.assert_allclose(sigma_points(m, S, p) @ wm, m, atol=1e-9)


class TestUnscentedTransform:
    @staticmethod
    def _affine(seed, n, m, alpha):
        rng = np.random.default_rng(seed)
        mean = rng.standard_normal(n)
        S = np.tril(rng.standard_normal((n, n)))
        S[np.diag_indices(n)] = np.abs(np.diag(S)) + 0.1
        A, b = rng.standard_normal((m, n)), rng.standard_normal(m)
        p = UTParams(alpha, 2.0, 3.0 - n, n)
        wm, wc = ut_weights(p)
        ym, Sy, _, _ = unscented_moments(A @ sigma_points(mean, S, p) + b[:, None], wm, wc)
        P = A @ S @ S.T @ A.T
        mean_err = np.max(np.abs(ym - (A @ mean + b)) / (np.abs(A) @ np.abs(mean) + np.abs(b)))
        cov_err = np.max(np.abs(Sy @ Sy.T - P)) / np.max(np.abs(P))
        return mean_err, cov_err, p

    @given(seed=seeds, n=st.integers(1, 6), m=st.integers(1, 8), alpha=st.sampled_from([1e-2, 0.1, 1.0]))
    def test_affine_exactness(self, seed, n, m, alpha):
        mean_err, cov_err, _ = self._affine(seed, n, m, alpha)
        assert mean_err < 1e-10
        assert cov_err < 1e-10

    @given(seed=seeds, n=st.integers(1, 6), m=st.integers(1, 8))
    def test_affine_small_alpha(self, seed, n, m):
        # the mean carries rounding of the sigma points amplified by the
        # weight 1 / (2 alpha^2 (n + kappa)); the covariance does not
        mean_err, cov_err, p = self._affine(seed, n, m, 1e-3)
        assert cov_err < 1e-10
        assert mean_err < 2 * n * np.finfo(float).eps / p.scale

    def test_fourth_moment_standard_gaussian(self):
        p = UTParams(1.0, 0.0, 3.0 - 1, 1)
        wm, _ = ut_weights(p)
        X = sigma_points(np.zeros(1), np.eye(1), p)
        assert float(wm @ X[0] ** 4) == pytest.approx(3.0, abs=1e-12)


class TestKalmanOracle:
    @settings(max_examples=15)
    @given(seed=seeds)
    def test_linear_system_matches_kalman(self, seed):
        rng = np.random.default_rng(seed)
        A, C, q, r = random_linear_system(rng)
        ys = simulate(rng, A, C, q, r, rng.standard_normal(2), 100)
        m0, S0 = rng.standard_normal(2), np.diag(rng.uniform(0.5, 2.0, 2))
        means, covs = kalman_filter(A, C, q, r, m0, S0 @ S0.T, ys)
        fs = FilterState(m0, S0)
        p = UTParams(1e-3, 2.0, 1.0, 2)
        for k, y in enumerate(ys):
            fs = srukf_step(fs, lambda X, u: A @ X, lambda X, u: C @ X, q, r, 0.0, y, p)
            assert is_sqrt_factor(fs.sqrt_cov)
            assert mean_error(fs.mean, means[k], covs[k]) < 1e-6
            assert np.linalg.norm(fs.cov - covs[k]) < 1e-5 * np.linalg.norm(covs[k])

    def test_degenerate_certainty(self):
        x0 = np.array([0.4, -1.3, 2.0])
        fs = FilterState(x0, np.zeros((3, 3)))
        p = UTParams(1.0, 2.0, 0.0, 3)
        for _ in range(20):
            fs = srukf_step(fs, lambda X, u: X, lambda X, u: X, np.zeros(3), np.zeros(3), 0.0, x0, p)
        np.testing.assert_allclose(fs.mean, x0, atol=1e-12)
        assert is_sqrt_factor(fs.sqrt_cov)
        assert np.max(np.abs(fs.sqrt_cov)) < 1e-5

    def test_step_counter_and_accepts_factor_noise(self):
        fs = FilterState(np.zeros(2), np.eye(2))
        Q = np.array([[0.1, 0.0], [0.05, 0.2]])
        p = UTParams(0.5, 2.0, 1.0, 2)
        a = srukf_step(fs, lambda X, u: X, lambda X, u: X[:1], Q, [0.1], 0.0, [0.3], p)
        assert a.step == 1
        P = np.eye(2) + Q @ Q.T
        K = P[:, 0] / (P[0, 0] + 0.01)
        np.testing.assert_allclose(a.mean, K * 0.3, rtol=1e-10)
        np.testing.assert_allclose(a.cov, P - np.outer(K, P[0]), rtol=1e-10)


class TestPseudoMeasurement:
    def test_zero(self):
        pm = PseudoMeasurement(2, 3)
        assert h_pm(pm, JointState(np.array([5.0, 1.0]), np.zeros(3))) == 0.0

    def test_hand_value(self):
        pm = PseudoMeasurement(2, 4, epsilon=0.1)
        assert h_pm(pm, JointState(np.zeros(2), np.array([0.5, -0.3, 0.0, 0.0]))) == pytest.approx(0.7, abs=1e-15)

    @given(x=st.lists(st.floats(-1e3, 1e3), min_size=2, max_size=2), seed=seeds)
    def test_independent_of_x(self, x, seed):
        pm = PseudoMeasurement(2, 5)
        theta = np.random.default_rng(seed).standard_normal(5)
        assert h_pm(pm, JointState(np.array(x), theta)) == h_pm(pm, JointState(np.zeros(2), theta))

    def test_selector(self):
        pm = PseudoMeasurement(2, 3)
        np.testing.assert_array_equal(pm.selector @ np.arange(1.0, 6.0), [0, 0, 3, 4, 5])

    @given(seed=seeds, t=st.floats(0, 1))
    def test_convex_and_lipschitz(self, seed, t):
        rng = np.random.default_rng(seed)
        pm = PseudoMeasurement(0, 4, epsilon=0.5)
        a, b = rng.standard_normal(4), rng.standard_normal(4)
        fa, fb = pm(a)[0], pm(b)[0]
        assert pm(t * a + (1 - t) * b)[0] <= t * fa + (1 - t) * fb + 1e-12
        assert abs(fa - fb) <= np.sum(np.abs(a - b)) + 1e-12

    def test_batch_shape(self):
        pm = PseudoMeasurement(2, 3)
        assert pm(np.ones((5, 7))).shape == (1, 7)

    @pytest.mark.parametrize("kw", [{"epsilon": 0.0}, {"r_pm": -1.0}])
    def test_validation(self, kw):
        with pytest.raises(ValueError):
            PseudoMeasurement(2, 3, **kw)


def _random_state(seed, n=5):
    rng = np.random.default_rng(seed)
    S = np.tril(rng.standard_normal((n, n)))
    S[np.diag_indices(n)] = np.abs(np.diag(S)) + 0.5
    return FilterState(rng.standard_normal(n), S)


class TestMerge:
    def test_identical_passes(self):
        fs = _random_state(0)
        merged = merge_passes(fs, fs, 2)
        np.testing.assert_array_equal(merged.mean, fs.mean)
        np.testing.assert_allclose(merged.sqrt_cov, fs.sqrt_cov, atol=1e-12)

    @given(seed=seeds)
    def test_blocks(self, seed):
        fs1, fs2 = _random_state(seed), _random_state(seed + 1)
        merged = merge_passes(fs1, fs2, 2)
        np.testing.assert_array_equal(merged.mean[:2], fs1.mean[:2])
        np.testing.assert_array_equal(merged.mean[2:], fs2.mean[2:])
        P = merged.cov
        np.testing.assert_allclose(P, P.T, atol=1e-12)
        assert np.all(np.linalg.eigvalsh(P) > 0)
        if merged.merge_fallbacks == 0:
            np.testing.assert_allclose(P[2:, 2:], fs2.cov[2:, 2:], rtol=1e-9, atol=1e-12)
            np.testing.assert_allclose(P[:2, :], fs1.cov[:2, :], rtol=1e-9, atol=1e-12)

    def test_fallback_when_not_pd(self):
        # strong x-theta coupling from pass 1 plus a tiny pass-2 theta block
        S1 = np.array([[1.0, 0.0], [1.0, 1e-3]])
        fs1 = FilterState(np.zeros(2), S1)
        fs2 = FilterState(np.ones(2), np.diag([1.0, 1e-6]))
        merged = merge_passes(fs1, fs2, 1)
        assert merged.merge_fallbacks == 1
        assert is_sqrt_factor(merged.sqrt_cov)
        assert np.all(np.linalg.eigvalsh(merged.cov) > 0)
        assert merged.mean[0] == 0.0 and merged.mean[1] == 1.0


def _joint_setup():
    model = duffing_joint_model()
    pm = PseudoMeasurement(2, 9, 0.01, 1.2)
    q = np.r_[1e-4, 1e-4, np.full(9, 1e-2)]
    fs = FilterState(np.r_[2.0, 1.0, np.full(9, 1e-3)], np.diag(np.r_[1.0, 1.0, np.full(9, 0.29)]))
    return model, pm, q, fs


class TestJointFilterStep:
    def test_infinite_pm_noise_is_idempotent(self):
        model, _, q, fs = _joint_setup()
        pm = PseudoMeasurement(2, 9, 0.01, 1e12)
        a = joint_filter_step(fs, model, pm, q, [1e-2], 0.0, [1.0], 0.08, pass2_process_noise=False)
        b = joint_filter_step(fs, model, pm, q, [1e-2], 0.0, [1.0], 0.08, pass2=False)
        np.testing.assert_allclose(a.mean, b.mean, atol=1e-9)
        np.testing.assert_allclose(a.cov, b.cov, atol=1e-9)

    def test_pass2_shrinks_theta(self):
        model, pm, q, fs = _joint_setup()
        fs = FilterState(np.r_[1.0, 0.0, np.full(9, 0.3)], fs.sqrt_cov)
        a = joint_filter_step(fs, model, pm, q, [1e-2], 0.0, [1.0], 0.08)
        b = joint_filter_step(fs, model, pm, q, [1e-2], 0.0, [1.0], 0.08, pass2=False)
        assert np.sum(np.abs(a.mean[2:])) < np.sum(np.abs(b.mean[2:]))
        np.testing.assert_array_equal(a.mean[:2], b.mean[:2])

    def test_requires_positive_sigma_star(self):
        model, pm, q, fs = _joint_setup()
        with pytest.raises(ValueError):
            joint_filter_step(fs, model, pm, q, [1e-2], 0.0, [1.0], 0.0)

    @pytest.mark.parametrize("unscaled", [False, True])
    def test_deterministic(self, unscaled):
        model, pm, q, fs0 = _joint_setup()
        flt = JointSRUKF(model, pm, q, np.array([1e-2]), 0.08, unscaled_pass2=unscaled)
        runs = []
        for _ in range(2):
            fs = fs0
            for k in range(50):
                fs = flt.step(fs, np.sin(0.01 * k), [np.cos(0.01 * k)])
            runs.append(fs)
        np.testing.assert_array_equal(runs[0].mean, runs[1].mean)
        np.testing.assert_array_equal(runs[0].sqrt_cov, runs[1].sqrt_cov)
        assert is_sqrt_factor(runs[0].sqrt_cov)

    def test_per_step_sigma_star(self):
        from joint_srukf.prior import HorseshoeSpec

        model, pm, q, fs = _joint_setup()
        flt = JointSRUKF(model, pm, q, np.array([1e-2]), 0.08, horseshoe=HorseshoeSpec(), resample_sigma_star=True)
        out = flt.step(fs, 0.0, [1.0])
        assert np.all(np.isfinite(out.mean))
