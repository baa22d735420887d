"""Square-root unscented Kalman filter and the two-pass joint estimator.

The joint estimator runs, per time step,

1. a square-root UKF on the joint model with ``kappa = 3 - n`` and the real
   measurement,
2. a second square-root UKF started from the first posterior, with identity
   dynamics, ``kappa = 3 sigma_star^2 - n`` and the sparsity pseudo-measurement
   ``max(sum|theta| - eps, 0)`` asserted to be zero,
3. a merge that keeps the first posterior except for the ``theta`` mean and
   the ``theta``-``theta`` covariance block, which come from the second pass.

Covariance factors are lower triangular with a nonnegative diagonal (see
:mod:`joint_srukf.linalg`).
"""
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np
from scipy.linalg import solve_triangular

from .errors import DowndateBreakdown, NonFiniteOutput, NotPositiveDefinite, ScaleFloorViolation
from .linalg import chol, psd_refactor, qr_compress, rank1_update

SCALE_FLOOR = 1e-8
NOISE_FLOOR = 1e-12


@dataclass(frozen=True)
class UTParams:
    alpha: float
    beta: float
    kappa: float
    n: int

    def __post_init__(self):
        if not 0.0 < self.alpha <= 1.0:
            raise ValueError("alpha must lie in (0, 1]")

    @property
    def lam(self):
        return self.alpha**2 * (self.n + self.kappa) - self.n

    @property
    def scale(self):
        """``n + lambda``, the squared sigma-point spread."""
        return self.n + self.lam


def ut_weights(p, floor=SCALE_FLOOR, clamp=False):
    """Scaled unscented-transform weights ``(W_m, W_c)``.

    If ``n + lambda < floor`` a :class:`ScaleFloorViolation` is raised, or
    with ``clamp=True`` the scale is lifted to ``floor``.
    """
    scale = p.scale
    if not scale >= floor:
        if not clamp:
            raise ScaleFloorViolation(f"n + lambda = {scale:.3e} below floor {floor:.1e}")
        scale = floor
    lam = scale - p.n
    wm = np.full(2 * p.n + 1, 0.5 / scale)
    wc = wm.copy()
    wm[0] = lam / scale
    wc[0] = wm[0] + 1.0 - p.alpha**2 + p.beta
    return wm, wc


def effective_scale(p, floor=SCALE_FLOOR, clamp=False):
    wm, _ = ut_weights(p, floor, clamp)
    return 0.5 / wm[1] if len(wm) > 1 else max(p.scale, floor)


def sigma_points(mean, S, p, floor=SCALE_FLOOR, clamp=False):
    """Columns ``mean``, ``mean + sqrt(n+lambda) S[:, i]``, ``mean - sqrt(n+lambda) S[:, i]``."""
    mean = np.asarray(mean, dtype=float)
    spread = np.sqrt(effective_scale(p, floor, clamp)) * np.asarray(S, dtype=float)
    return np.column_stack([mean[:, None], mean[:, None] + spread, mean[:, None] - spread])


def _pad_rows(rows):
    # fewer sigma deviations than outputs: the covariance is rank deficient
    short = rows.shape[1] - rows.shape[0]
    return np.vstack([rows, np.zeros((short, rows.shape[1]))]) if short > 0 else rows


def unscented_moments(Y, wm, wc, noise_sqrt=None):
    """Weighted mean and lower square root of the covariance of sigma images ``Y``.

    Deviations are taken from the central image, which turns the usual
    (possibly hugely negative) zeroth covariance weight into a rank-1 term
    with coefficient ``sum(W_c) - 2 = beta - alpha^2``. If that term is a
    downdate that breaks down, the sigma-point part of the covariance is
    projected onto the PSD cone before the noise is added back, so the
    result never drops below the noise covariance.

    Returns
    -------
    mean, S, e, breakdowns
        ``e`` is ``mean - Y[:, 0]``.
    """
    Y0 = Y[:, 0]
    D = Y[:, 1:] - Y0[:, None]
    e = D @ wm[1:]
    mean = Y0 + e
    rows = (D * np.sqrt(wc[1:])).T
    if noise_sqrt is not None:
        rows = np.vstack([rows, np.asarray(noise_sqrt).T])
    S = qr_compress(_pad_rows(rows))
    c0 = float(np.sum(wc) - 2.0)
    if c0 == 0.0 or not np.any(e):
        return mean, S, e, 0
    sign = 1 if c0 > 0 else -1
    try:
        return mean, rank1_update(S, np.sqrt(abs(c0)) * e, sign), e, 0
    except DowndateBreakdown:
        P = (D * wc[1:]) @ D.T + c0 * np.outer(e, e)
        w, V = np.linalg.eigh(0.5 * (P + P.T))
        rows = (V * np.sqrt(np.maximum(w, 0.0))).T
        if noise_sqrt is not None:
            rows = np.vstack([rows, np.asarray(noise_sqrt).T])
        return mean, qr_compress(_pad_rows(rows)), e, 1


def _rank1_or_recover(S, v, sign):
    """Rank-1 update/downdate; on breakdown clip eigenvalues and refactor.

    Returns the new factor and 1 if the recovery path was taken, else 0.
    """
    try:
        return rank1_update(S, v, sign), 0
    except DowndateBreakdown:
        P = S @ S.T + sign * np.outer(v, v)
        return psd_refactor(P), 1


def _noise_factor(q, n):
    """Lower factor for diagonal std vector or an explicit factor, diagonal floored."""
    q = np.asarray(q, dtype=float)
    if q.ndim <= 1:
        Q = np.diag(np.broadcast_to(q, (n,)).astype(float))
    else:
        Q = np.array(q)
    idx = np.diag_indices(n)
    Q[idx] = np.maximum(np.abs(Q[idx]), NOISE_FLOOR)
    return Q


@dataclass(frozen=True)
class FilterState:
    """Posterior mean, lower covariance factor and diagnostics counters."""

    mean: np.ndarray
    sqrt_cov: np.ndarray
    step: int = 0
    breakdowns: int = 0
    merge_fallbacks: int = 0

    @property
    def cov(self):
        return self.sqrt_cov @ self.sqrt_cov.T

    def joint(self, n_x):
        from .models import JointState

        return JointState.from_vector(self.mean, n_x)


def srukf_step(fs, dyn, obs, q_sqrt, r_sqrt, u, y, p, *, floor=SCALE_FLOOR, clamp=False):
    """One square-root UKF predict/update cycle.

    Parameters
    ----------
    fs : FilterState
    dyn, obs : callable
        ``dyn(X, u)`` maps ``(n, k)`` columns to ``(n, k)``; ``obs(X, u)``
        maps them to ``(m, k)``.
    q_sqrt, r_sqrt : array_like
        Standard-deviation vectors or lower factors of the process and
        measurement noise covariances.
    p : UTParams
    """
    n = len(fs.mean)
    wm, wc = ut_weights(p, floor, clamp)
    breakdowns = 0

    X = sigma_points(fs.mean, fs.sqrt_cov, p, floor, clamp)
    Xp = np.asarray(dyn(X, u), dtype=float)
    if not np.all(np.isfinite(Xp)):
        raise NonFiniteOutput("propagated sigma points are not finite")
    x_pred, S_pred, _, bd = unscented_moments(Xp, wm, wc, _noise_factor(q_sqrt, n))
    breakdowns += bd

    X2 = sigma_points(x_pred, S_pred, p, floor, clamp)
    Y = np.atleast_2d(np.asarray(obs(X2, u), dtype=float))
    if not np.all(np.isfinite(Y)):
        raise NonFiniteOutput("predicted measurements are not finite")
    m = Y.shape[0]
    y_pred, Sy, ey, bd = unscented_moments(Y, wm, wc, _noise_factor(r_sqrt, m))
    breakdowns += bd

    dx = X2[:, 1:] - X2[:, :1]
    dy = Y[:, 1:] - Y[:, :1]
    ex = dx @ wm[1:]
    Pxy = (dx * wc[1:]) @ dy.T + (np.sum(wc) - 2.0) * np.outer(ex, ey)
    K = solve_triangular(Sy.T, solve_triangular(Sy, Pxy.T, lower=True), lower=False).T

    innov = np.asarray(y, dtype=float).reshape(m) - y_pred
    mean = x_pred + K @ innov
    U = K @ Sy
    S = S_pred
    for j in range(m):
        S, flag = _rank1_or_recover(S, U[:, j], -1)
        breakdowns += flag
    if not (np.all(np.isfinite(mean)) and np.all(np.isfinite(S))):
        raise NonFiniteOutput("filter step produced non-finite estimates")
    return FilterState(mean, S, fs.step + 1, fs.breakdowns + breakdowns, fs.merge_fallbacks)


@dataclass(frozen=True)
class PseudoMeasurement:
    """Sparsity pseudo-measurement ``max(||I_theta x||_1 - epsilon, 0)``.

    ``r_pm`` is the pseudo-measurement noise standard deviation.
    """

    n_x: int
    n_theta: int
    epsilon: float = 0.01
    r_pm: float = 1e3

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")
        if not self.r_pm > 0:
            raise ValueError("r_pm must be positive")

    @property
    def selector(self):
        return np.diag(np.r_[np.zeros(self.n_x), np.ones(self.n_theta)])

    def __call__(self, xt, u=None):
        xt = np.asarray(xt, dtype=float)
        l1 = np.sum(np.abs(xt[self.n_x:]), axis=0)
        return np.maximum(l1 - self.epsilon, 0.0)[None, ...]


def h_pm(pm, s):
    """Pseudo-measurement value for a :class:`~joint_srukf.models.JointState`."""
    return float(pm(s.vector)[0])


def _identity(X, u):
    return X


def merge_passes(fs1, fs2, n_x):
    """Pass-1 posterior with the theta mean and theta-theta covariance block from pass 2."""
    mean = fs1.mean.copy()
    mean[n_x:] = fs2.mean[n_x:]
    P = fs1.sqrt_cov @ fs1.sqrt_cov.T
    P2 = fs2.sqrt_cov @ fs2.sqrt_cov.T
    P[n_x:, n_x:] = P2[n_x:, n_x:]
    P = 0.5 * (P + P.T)
    fallback = 0
    try:
        S = chol(P)
    except NotPositiveDefinite:
        S = psd_refactor(P)
        fallback = 1
    return replace(
        fs1,
        mean=mean,
        sqrt_cov=S,
        breakdowns=fs2.breakdowns,
        merge_fallbacks=fs2.merge_fallbacks + fallback,
    )


def joint_filter_step(
    fs,
    model,
    pm,
    q_sqrt,
    r_sqrt,
    u,
    y,
    sigma_star2,
    *,
    alpha=1e-3,
    beta=2.0,
    pass2=True,
    unscaled_pass2=False,
    pass2_process_noise=True,
):
    """Two-pass joint update for one time step.

    ``q_sqrt`` covers the full joint state (``n_x + n_theta`` entries) and
    ``r_sqrt`` the ``m`` real measurements.
    """
    if not sigma_star2 > 0:
        raise ValueError("sigma_star2 must be positive")
    n = model.dim
    p1 = UTParams(alpha, beta, 3.0 - n, n)
    fs1 = srukf_step(fs, model.step, model.observe, q_sqrt, r_sqrt, u, y, p1)
    if not pass2 or model.n_theta == 0:
        return fs1
    a2, b2 = (1.0, 0.0) if unscaled_pass2 else (alpha, beta)
    p2 = UTParams(a2, b2, 3.0 * sigma_star2 - n, n)
    q2 = q_sqrt if pass2_process_noise else np.zeros(n)
    fs2 = srukf_step(fs1, _identity, pm, q2, [pm.r_pm], u, [0.0], p2, clamp=True)
    return merge_passes(fs1, fs2, model.n_x)


@dataclass
class JointSRUKF:
    """Stateful wrapper around :func:`joint_filter_step`.

    With ``resample_sigma_star`` the horseshoe expectation is re-estimated
    every step from a fresh substream (``n_samples`` draws each), as a
    literal reading of the per-step loop; by default it is computed once.
    """

    model: object
    pm: PseudoMeasurement
    q_sqrt: np.ndarray
    r_sqrt: np.ndarray
    sigma_star2: float
    alpha: float = 1e-3
    beta: float = 2.0
    pass2: bool = True
    unscaled_pass2: bool = False
    pass2_process_noise: bool = True
    horseshoe: Optional[object] = None
    resample_sigma_star: bool = False
    n_samples: int = 100_000
    seed: int = 0

    def step(self, fs, u, y):
        s2 = self.sigma_star2
        if self.resample_sigma_star:
            from .prior import sigma_star

            s2 = sigma_star(self.horseshoe, self.n_samples, (self.seed, fs.step)).value
        return joint_filter_step(
            fs,
            self.model,
            self.pm,
            self.q_sqrt,
            self.r_sqrt,
            u,
            y,
            s2,
            alpha=self.alpha,
            beta=self.beta,
            pass2=self.pass2,
            unscaled_pass2=self.unscaled_pass2,
            pass2_process_noise=self.pass2_process_noise,
        )
