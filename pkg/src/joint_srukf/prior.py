"""Laplace density and the regularized horseshoe hierarchy.

The horseshoe variance ``sigma^2 = lambda_reg^2 tau^2`` is built from
``lambda ~ C+(0, 1)``, ``tau ~ C+(0, tau0)`` and ``c^2 ~ Inv-Gamma(a, b)``
with ``lambda_reg = c lambda / sqrt(c^2 + tau^2 lambda^2)``. Its expectation
has no convenient closed form and is estimated by Monte Carlo.
"""
from dataclasses import dataclass
from typing import NamedTuple, Optional, Sequence

import numpy as np

DEFAULT_CHUNK = 1_000_000


@dataclass(frozen=True)
class LaplaceParams:
    mu: float = 0.0
    sigma: float = 1.0

    def __post_init__(self):
        if not self.sigma > 0:
            raise ValueError("Laplace scale sigma must be positive")

    @classmethod
    def from_variance(cls, variance, mu=0.0):
        """Scale such that the distribution variance ``2 sigma^2`` equals ``variance``."""
        return cls(mu, float(np.sqrt(variance / 2.0)))


@dataclass(frozen=True)
class HorseshoeSpec:
    tau0: float = 0.1
    a: float = 4.5
    b: float = 1.5
    xi: Optional[Sequence[float]] = None

    def __post_init__(self):
        for name in ("tau0", "a", "b"):
            if not getattr(self, name) > 0:
                raise ValueError(f"horseshoe {name} must be positive")
        if self.xi is not None and np.any(np.asarray(self.xi) <= 0):
            raise ValueError("per-parameter scales xi must be positive")

    def scales(self, n_theta):
        if self.xi is None:
            return np.ones(n_theta)
        return np.broadcast_to(np.asarray(self.xi, float), (n_theta,)).copy()


def laplace_pdf(p, t):
    t = np.asarray(t, dtype=float)
    return np.exp(-np.abs(t - p.mu) / p.sigma) / (2.0 * p.sigma)


def gaussian_pdf(t, variance, mu=0.0):
    t = np.asarray(t, dtype=float)
    return np.exp(-0.5 * (t - mu) ** 2 / variance) / np.sqrt(2.0 * np.pi * variance)


def regularized_lambda(c, lam, tau):
    """``c lam / sqrt(c^2 + tau^2 lam^2)``; equals ``lam`` at ``tau = 0``, saturates at ``c / tau``."""
    if not np.all(np.asarray(c) > 0):
        raise ValueError("c must be positive")
    c, lam, tau = (np.asarray(v, dtype=float) for v in (c, lam, tau))
    tl = tau * lam
    with np.errstate(invalid="ignore"):
        out = c * lam / np.sqrt(c * c + tl * tl)
    # lam = inf with tau > 0 saturates at c / tau
    return np.where(np.isinf(lam) & (tau > 0), c / np.where(tau > 0, tau, 1.0), out)[()]


def sample_half_cauchy(scale, size, rng):
    u = rng.random(size)
    return np.abs(scale * np.tan(np.pi * (u - 0.5)))


def sample_inv_gamma(a, b, size, rng):
    """Inverse-gamma with shape ``a`` and rate ``b`` (mean ``b / (a - 1)``)."""
    return 1.0 / rng.gamma(a, 1.0 / b, size)


def sample_sigma2(spec, rng, size=None):
    """Draw ``sigma^2 = lambda_reg^2 tau^2``; always inside ``(0, c^2)``.

    Computed as ``c^2 z^2 / (c^2 + z^2)`` with ``z = tau lambda`` to keep the
    upper bound exact in floating point.
    """
    lam = sample_half_cauchy(1.0, size, rng)
    tau = sample_half_cauchy(spec.tau0, size, rng)
    c2 = sample_inv_gamma(spec.a, spec.b, size, rng)
    z2 = (tau * lam) ** 2
    return c2 * z2 / (c2 + z2)


class MonteCarloEstimate(NamedTuple):
    value: float
    stderr: float
    n_samples: int


def sigma_star(spec, n_samples=1_000_000, seed=0, chunk_size=DEFAULT_CHUNK):
    """Monte-Carlo estimate of ``E[sigma^2]`` under the horseshoe hierarchy.

    Samples are drawn in chunks, each from its own substream spawned from
    ``seed``, so the result is bit-identical for a fixed
    ``(seed, n_samples, chunk_size)`` and a prefix of a longer run reuses the
    same draws.
    """
    if n_samples < 1:
        raise ValueError("n_samples must be positive")
    n_chunks = -(-n_samples // chunk_size)
    streams = np.random.SeedSequence(seed).spawn(n_chunks)
    total = 0.0
    total_sq = 0.0
    remaining = n_samples
    for ss in streams:
        k = min(chunk_size, remaining)
        s = sample_sigma2(spec, np.random.default_rng(ss), k)
        total += float(np.sum(s))
        total_sq += float(np.sum(s * s))
        remaining -= k
    mean = total / n_samples
    var = max(total_sq / n_samples - mean * mean, 0.0)
    stderr = np.sqrt(var / max(n_samples - 1, 1))
    return MonteCarloEstimate(mean, float(stderr), n_samples)


def density_comparison(
    grid=None,
    gaussian_variances=(1.0, 0.9, 0.8, 0.75, 0.7, 0.65),
    laplace_variance=0.75,
    convention="distribution",
):
    """Tabulate Gaussian densities of shrinking variance next to a Laplace density.

    ``convention="distribution"`` reads ``laplace_variance`` as the Laplace
    distribution's variance ``2 sigma^2``; ``"scale"`` reads it as ``sigma^2``.

    Returns
    -------
    header : list of str
    rows : ndarray, shape (len(grid), 2 + len(gaussian_variances))
    """
    if grid is None:
        grid = np.linspace(-4.0, 4.0, 161)
    grid = np.asarray(grid, dtype=float)
    if convention == "distribution":
        lp = LaplaceParams.from_variance(laplace_variance)
    elif convention == "scale":
        lp = LaplaceParams(0.0, float(np.sqrt(laplace_variance)))
    else:
        raise ValueError(f"unknown variance convention {convention!r}")
    cols = [grid, laplace_pdf(lp, grid)]
    cols += [gaussian_pdf(grid, v) for v in gaussian_variances]
    header = ["t", "laplace"] + [f"gauss_var_{v:g}" for v in gaussian_variances]
    return header, np.column_stack(cols)
