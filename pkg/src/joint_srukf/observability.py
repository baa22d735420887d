"""Local observability of the joint system with the sparsity pseudo-measurement.

The continuous-time Lie-derivative stack is replaced by its discrete analogue:
outputs ``(h, h_pm)`` along ``n`` Euler iterates of the joint model. The
Jacobian of that map is taken by central differences. Because iterate ``l``
differs from iterate ``l-1`` only at order ``dt``, the raw Jacobian has
singular values that decay like ``dt**l``; the rank is therefore evaluated
after an invertible change of rows to forward divided differences
``Delta^l y / dt^l`` (the discrete counterparts of the Lie derivatives), with
the whole computation carried out in extended precision.
"""
import warnings
from dataclasses import dataclass
from math import comb

import mpmath
import numpy as np

from .linalg import numerical_rank
from .models import JointState

FD_REL_STEP = 1e-6
KINK_MARGIN = 10.0
DEFAULT_DPS = 60


@dataclass(frozen=True)
class ObservabilityReport:
    rank: int
    required: int
    singular_values: np.ndarray
    observable: bool
    probe_point: JointState
    with_pseudo_measurement: bool = True

    def format(self):
        sv = " ".join(f"{v:.3e}" for v in self.singular_values)
        status = "observable" if self.observable else "NOT observable"
        return (
            f"rank {self.rank} / {self.required} ({status})\n"
            f"pseudo-measurement included: {self.with_pseudo_measurement}\n"
            f"probe x: {list(map(float, self.probe_point.x))}\n"
            f"probe theta: {list(map(float, self.probe_point.theta))}\n"
            f"singular values: {sv}"
        )


def _outputs(model, pm, z, u):
    y = list(np.asarray(model.observe(z, u)).ravel())
    if pm is not None:
        y += list(np.asarray(pm(z)).ravel())
    return y


def observability_map(model, pm, s, u=0.0, n_iter=None):
    """Stack ``(h, h_pm)`` along ``n_iter`` (default ``n``) joint iterates.

    ``pm=None`` drops the pseudo-measurement. Works for float and
    ``mpmath`` object arrays alike.
    """
    z = s.vector if isinstance(s, JointState) else np.asarray(s)
    if z.dtype != object:
        z = z.astype(float)
    n_iter = model.dim if n_iter is None else n_iter
    out = []
    for _ in range(n_iter):
        out.extend(_outputs(model, pm, z, u))
        z = model.step(z, u)
    return np.array(out, dtype=z.dtype)


def _kink_distance(pm, theta):
    theta = np.abs(np.asarray(theta, dtype=float))
    d = [abs(float(np.sum(theta)) - pm.epsilon)]
    if theta.size:
        d.append(float(np.min(theta)))
    return min(d)


def observability_jacobian(model, pm, s, u=0.0, dps=DEFAULT_DPS):
    """Jacobian of the divided-difference observability map, as floats.

    Row block ``l`` holds the derivative of ``Delta^l y / dt^l``, where
    ``y`` is the per-iterate output vector.
    """
    v = s.vector
    n = len(v)
    k = len(_outputs(model, pm, v, u))
    with mpmath.workdps(dps):
        base = np.array([mpmath.mpf(float(a)) for a in v], dtype=object)
        cols = []
        for i in range(n):
            h = mpmath.mpf(FD_REL_STEP) * max(1.0, abs(float(v[i])))
            e = np.array([mpmath.mpf(0)] * n, dtype=object)
            e[i] = h
            plus = observability_map(model, pm, base + e, u)
            minus = observability_map(model, pm, base - e, u)
            cols.append((plus - minus) / (2 * h))
        J = np.array(cols, dtype=object).T.reshape(n, k, n)
        dt = mpmath.mpf(model.dt)
        D = np.empty_like(J)
        for l in range(n):
            acc = J[0] * 0
            for j in range(l + 1):
                acc = acc + (-1) ** (l - j) * comb(l, j) * J[j]
            D[l] = acc / dt**l
        return np.array(D.reshape(n * k, n), dtype=float)


def check_observability(model, pm, probe, u=0.0, tol=1e-8, *, dps=DEFAULT_DPS, strict=False):
    """Rank test of the joint system at ``probe``.

    Probes closer than ``10 * fd_step`` to a kink of ``h_pm`` (some
    ``theta_i = 0`` or ``sum|theta| = epsilon``) emit a warning, or raise with
    ``strict=True``.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    if pm is not None and model.n_theta:
        margin = KINK_MARGIN * FD_REL_STEP * max(1.0, float(np.max(np.abs(probe.vector))))
        if _kink_distance(pm, probe.theta) <= margin:
            msg = "probe lies at a kink of the pseudo-measurement; rank may be unreliable"
            if strict:
                raise ValueError(msg)
            warnings.warn(msg, RuntimeWarning, stacklevel=2)
    Q = observability_jacobian(model, pm, probe, u, dps)
    sv = np.linalg.svd(Q, compute_uv=False)
    rank = numerical_rank(Q, tol)
    return ObservabilityReport(
        rank=rank,
        required=model.dim,
        singular_values=sv,
        observable=rank == model.dim,
        probe_point=probe,
        with_pseudo_measurement=pm is not None,
    )
