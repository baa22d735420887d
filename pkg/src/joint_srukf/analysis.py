"""Error metrics, PCA-based dominant-term extraction and ``g`` reconstruction."""
from dataclasses import dataclass, field

import numpy as np

from .errors import InsufficientSamples
from .models import eval_library


@dataclass
class EstimateLog:
    """Time-indexed record of one observer run.

    ``theta`` is stored column-wise, shape ``(n_theta, N)``; all other
    arrays have time along the first axis.
    """

    times: np.ndarray
    x_true: np.ndarray
    x_est: np.ndarray
    theta: np.ndarray
    y: np.ndarray
    u: np.ndarray = None
    term_names: tuple = ()

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        N = len(self.times)
        self.x_true = np.asarray(self.x_true, dtype=float).reshape(N, -1)
        self.x_est = np.asarray(self.x_est, dtype=float).reshape(N, -1)
        self.y = np.asarray(self.y, dtype=float).reshape(N, -1)
        self.theta = np.asarray(self.theta, dtype=float).reshape(-1, N)
        self.u = np.zeros(N) if self.u is None else np.asarray(self.u, dtype=float).reshape(N)
        if N > 1 and np.any(np.diff(self.times) <= 0):
            raise ValueError("times must be strictly increasing")
        if self.x_true.shape != self.x_est.shape:
            raise ValueError("true and estimated state histories differ in shape")
        if self.term_names and len(self.term_names) != self.theta.shape[0]:
            raise ValueError("term_names does not match the number of parameters")

    @property
    def n_steps(self):
        return len(self.times)

    def after(self, burn_in):
        """Boolean mask of samples with ``t >= t0 + burn_in``."""
        return self.times >= self.times[0] + burn_in - 1e-9


def _step_widths(times):
    if len(times) < 2:
        return np.ones_like(times)
    dt = np.diff(times)
    return np.concatenate([dt[:1], dt])


def cumulative_error(log):
    """Running sum of ``||x_true - x_est||_2 * dt``."""
    err = np.linalg.norm(log.x_true - log.x_est, axis=1)
    return np.cumsum(err * _step_widths(log.times))


def state_rmse(log, burn_in=0.0):
    mask = log.after(burn_in)
    d = log.x_true[mask] - log.x_est[mask]
    return np.sqrt(np.mean(d**2, axis=0))


def sparsity_count(log, burn_in=2.0, fraction=0.1):
    """Number of parameters whose mean ``|theta_i|`` after burn-in exceeds ``fraction`` of the largest."""
    if log.theta.shape[0] == 0:
        return 0
    avg = np.mean(np.abs(log.theta[:, log.after(burn_in)]), axis=1)
    top = np.max(avg)
    if top == 0.0:
        return 0
    return int(np.count_nonzero(avg > fraction * top))


@dataclass(frozen=True)
class DominanceReport:
    shares: np.ndarray
    ranking: np.ndarray
    selected: np.ndarray
    burn_in: float
    threshold: float
    eigenvalues: np.ndarray = field(repr=False, default=None)
    n_samples: int = 0

    def cumulative(self):
        return np.cumsum(self.shares[self.ranking])


def pca_dominance(log, burn_in=2.0, threshold=0.95):
    """Per-term share of the uncentered second moment of ``Theta`` after burn-in.

    The matrix ``Theta' Theta'^T / N'`` is eigendecomposed and each term gets
    the eigenvalue-weighted sum of its squared loadings, normalized by the
    trace. No mean is subtracted, so a constant offset in ``theta_i`` counts
    towards its term.
    """
    theta = log.theta[:, log.after(burn_in)]
    n_theta, n = theta.shape
    if n_theta == 0:
        raise InsufficientSamples("log holds no parameters")
    if n < n_theta:
        raise InsufficientSamples(f"{n} samples after burn-in, need at least {n_theta}")
    M = theta @ theta.T / n
    w, V = np.linalg.eigh(M)
    w = np.clip(w, 0.0, None)
    total = float(np.sum(w))
    if total > 0.0:
        shares = (V**2) @ w / total
        shares = shares / np.sum(shares)
    else:
        shares = np.full(n_theta, 1.0 / n_theta)
    ranking = np.argsort(-shares, kind="stable")
    cum = np.cumsum(shares[ranking])
    k = int(np.searchsorted(cum, threshold - 1e-12)) + 1
    return DominanceReport(
        shares=shares,
        ranking=ranking,
        selected=np.sort(ranking[: min(k, n_theta)]),
        burn_in=burn_in,
        threshold=threshold,
        eigenvalues=w[::-1],
        n_samples=n,
    )


def pca_dominance_windowed(log, window, stride=None, threshold=0.95):
    """Dominance reports over sliding windows of ``window`` seconds."""
    stride = window if stride is None else stride
    t0 = log.times[0]
    # the last sample covers one step width
    t_end = log.times[-1] + (log.times[-1] - log.times[-2] if len(log.times) > 1 else 0.0)
    reports = []
    start = t0
    while start + window <= t_end + 1e-9:
        mask = (log.times >= start - 1e-9) & (log.times < start + window - 1e-9)
        sub = EstimateLog(
            log.times[mask], log.x_true[mask], log.x_est[mask], log.theta[:, mask], log.y[mask], log.u[mask]
        )
        reports.append((start, pca_dominance(sub, 0.0, threshold)))
        start += stride
    return reports


def reconstruct_g(log, lib, terms=None):
    """``sum_{i in terms} theta_i(k) psi_i(x_est(k), u_k)`` for every step."""
    psi = eval_library(lib, log.x_est.T, log.u)
    prod = log.theta * psi
    if terms is not None:
        terms = np.asarray(list(terms), dtype=int)
        if terms.size and (terms.min() < 0 or terms.max() >= lib.n_theta):
            raise IndexError("term index out of range")
        prod = prod[terms]
    return np.sum(prod, axis=0)


def rms(a):
    a = np.asarray(a, dtype=float)
    return float(np.sqrt(np.mean(a**2))) if a.size else 0.0
