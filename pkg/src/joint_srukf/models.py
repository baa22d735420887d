"""Function libraries, the joint state/parameter model and the Duffing benchmark.

All model callables accept either a single state of shape ``(n,)`` or a batch
of column states of shape ``(n, k)``; sigma points are pushed through in one
call. Object arrays of ``mpmath.mpf`` are passed through untouched so the
observability check can evaluate the model in extended precision.
"""
import re
from dataclasses import dataclass, field
from typing import Callable, Sequence

import mpmath
import numpy as np

from .errors import NonFiniteOutput

DUFFING_P = (-1.0, 3.0, 0.1)
DUFFING_LIBRARY = ("1", "x1", "x2", "x2^2", "sin(x2)", "x1^2", "x1*x2", "cos(x1)", "u")

_TRIG = re.compile(r"^(sin|cos)\(x(\d+)\)$")
_FACTOR = re.compile(r"^x(\d+)(?:\^(\d+))?$")


def as_numeric(a):
    """Float array, unless ``a`` is an object array (extended precision)."""
    a = np.asarray(a)
    return a if a.dtype == object else a.astype(float)


def _ones(x):
    return x[0] * 0 + 1


def _trig(np_fn, mp_fn):
    mp_vec = np.vectorize(mp_fn, otypes=[object])

    def apply(v):
        if isinstance(v, mpmath.mpf) or (isinstance(v, np.ndarray) and v.dtype == object):
            return mp_vec(v)[()]
        return np_fn(v)

    return apply


_SIN = _trig(np.sin, mpmath.sin)
_COS = _trig(np.cos, mpmath.cos)


def _catalog_function(name):
    """Build a basis function from its catalog name.

    Supported: ``1``, ``u``, ``sin(xi)``, ``cos(xi)`` and monomials such as
    ``x1``, ``x2^2`` or ``x1^2*x2`` of total degree at most 3.
    """
    name = name.replace(" ", "")
    if name == "1":
        return lambda x, u: _ones(x)
    if name == "u":
        return lambda x, u: _ones(x) * u
    m = _TRIG.match(name)
    if m:
        op = _SIN if m.group(1) == "sin" else _COS
        i = int(m.group(2)) - 1
        return lambda x, u: op(x[i])
    powers = {}
    for part in name.split("*"):
        m = _FACTOR.match(part)
        if not m:
            raise ValueError(f"unknown library term {name!r}")
        i = int(m.group(1)) - 1
        if i < 0:
            raise ValueError(f"state indices start at 1 in {name!r}")
        powers[i] = powers.get(i, 0) + int(m.group(2) or 1)
    if sum(powers.values()) > 3:
        raise ValueError(f"monomial {name!r} exceeds degree 3")
    items = tuple(sorted(powers.items()))

    def monomial(x, u):
        out = _ones(x)
        for i, p in items:
            out = out * x[i] ** p
        return out

    return monomial


@dataclass(frozen=True)
class FunctionLibrary:
    """Ordered, named basis functions ``psi_i(x, u)``."""

    names: tuple
    functions: tuple = field(repr=False)

    def __post_init__(self):
        if len(self.names) != len(self.functions):
            raise ValueError("names and functions differ in length")
        if len(set(self.names)) != len(self.names):
            raise ValueError("library term names must be unique")

    @classmethod
    def from_names(cls, names):
        names = tuple(n.strip() for n in names)
        return cls(names, tuple(_catalog_function(n) for n in names))

    @property
    def n_theta(self):
        return len(self.names)

    def __len__(self):
        return len(self.names)

    def __call__(self, x, u):
        return eval_library(self, x, u)

    def index(self, name):
        return self.names.index(name)


def eval_library(lib, x, u):
    """Evaluate ``Psi(x, u)``; shape ``(n_theta,)`` or ``(n_theta, k)`` for batches."""
    x = as_numeric(x)
    dtype = x.dtype
    out = np.array([np.broadcast_to(fn(x, u), x.shape[1:]) for fn in lib.functions], dtype=dtype)
    if out.size == 0:
        out = np.zeros((0,) + x.shape[1:], dtype=dtype)
    if dtype != object and not np.all(np.isfinite(out)):
        raise NonFiniteOutput("library evaluation produced non-finite values")
    return out


def duffing_library(extra=()):
    """The nine-term Duffing library, optionally extended (e.g. ``("x1^3",)``)."""
    return FunctionLibrary.from_names(DUFFING_LIBRARY + tuple(extra))


@dataclass(frozen=True)
class JointState:
    """Stacked joint state: physical state ``x`` first, coefficients ``theta`` second."""

    x: np.ndarray
    theta: np.ndarray

    @classmethod
    def from_vector(cls, v, n_x):
        v = np.asarray(v, dtype=float)
        return cls(v[:n_x].copy(), v[n_x:].copy())

    @property
    def n_x(self):
        return len(self.x)

    @property
    def n_theta(self):
        return len(self.theta)

    @property
    def dim(self):
        return self.n_x + self.n_theta

    @property
    def vector(self):
        return np.concatenate([np.asarray(self.x, float), np.asarray(self.theta, float)])


@dataclass(frozen=True)
class NoiseSpec:
    """Standard deviations of process, parameter and measurement noise."""

    q_x: Sequence[float] = (1e-4, 1e-4)
    q_theta: float | Sequence[float] = 1e-5
    r: float | Sequence[float] = 1e-2
    seed: int = 0

    def __post_init__(self):
        for name in ("q_x", "q_theta", "r"):
            if np.any(np.asarray(getattr(self, name)) < 0):
                raise ValueError(f"noise standard deviation {name} must be >= 0")

    def theta_std(self, n_theta):
        return np.broadcast_to(np.asarray(self.q_theta, float), (n_theta,)).copy()

    def r_std(self, m):
        return np.broadcast_to(np.asarray(self.r, float), (m,)).copy()


@dataclass(frozen=True)
class JointModel:
    """Discrete joint model ``x+ = x + dt f(x, u, g)``, ``theta+ = theta``.

    ``f(x, u, g)`` receives ``g`` shaped like ``x`` with ``theta^T Psi(x, u)``
    placed in the rows listed in ``g_injection`` and zeros elsewhere.
    ``h(x, u)`` must return an array of shape ``(m,)`` / ``(m, k)``.
    """

    f: Callable
    h: Callable
    library: FunctionLibrary
    dt: float
    n_x: int
    m: int
    g_injection: tuple = (1,)

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be positive")

    @property
    def n_theta(self):
        return self.library.n_theta

    @property
    def dim(self):
        return self.n_x + self.n_theta

    def correction(self, x, theta, u):
        """``theta^T Psi(x, u)`` for a single state or a batch."""
        psi = eval_library(self.library, x, u)
        return np.sum(theta * psi, axis=0)

    def step(self, xt, u):
        """Euler step of stacked joint vector(s) ``xt``; theta is carried unchanged."""
        xt = as_numeric(xt)
        x, theta = xt[: self.n_x], xt[self.n_x:]
        g = np.zeros_like(x)
        if self.n_theta:
            g[list(self.g_injection)] = self.correction(x, theta, u)
        x_next = x + self.dt * np.asarray(self.f(x, u, g), dtype=xt.dtype)
        if xt.dtype != object and not np.all(np.isfinite(x_next)):
            raise NonFiniteOutput("joint step produced non-finite state")
        return np.concatenate([x_next, theta], axis=0)

    def observe(self, xt, u):
        xt = as_numeric(xt)
        return np.asarray(self.h(xt[: self.n_x], u), dtype=xt.dtype)


def joint_step(model, s, u):
    """Advance a :class:`JointState` by one noise-free Euler step."""
    v = model.step(s.vector, u)
    return JointState.from_vector(v, model.n_x)


def duffing_rhs(x, u, p=DUFFING_P):
    """Full Duffing vector field ``(x2, -p3 x2 - p1 x1 - p2 x1^3 + u)``."""
    p1, p2, p3 = p
    x1, x2 = x[0], x[1]
    return np.array([x2, -p3 * x2 - p1 * x1 - p2 * x1**3 + u])


def duffing_missing_term(x, u=0.0, p=DUFFING_P):
    """The term omitted by the corrupted model, ``g = -p2 x1^3``."""
    return -p[1] * np.asarray(x)[0] ** 3


def duffing_observation(x, u=0.0):
    return np.asarray(x)[0:1]


def duffing_joint_model(library=None, dt=0.01, p=DUFFING_P):
    """Corrupted Duffing model (cubic term dropped) with ``theta^T Psi`` on ``x2``."""
    p1, _, p3 = p

    def f(x, u, g):
        return np.array([x[1] + g[0], -p3 * x[1] - p1 * x[0] + u + g[1]])

    return JointModel(
        f=f,
        h=duffing_observation,
        library=library if library is not None else duffing_library(),
        dt=dt,
        n_x=2,
        m=1,
        g_injection=(1,),
    )


@dataclass(frozen=True)
class Sinusoid:
    """Input signal ``amplitude * sin(omega * t + phase)``."""

    amplitude: float = 2.0
    omega: float = 1.0
    phase: float = 0.0

    def __call__(self, t):
        return self.amplitude * np.sin(self.omega * np.asarray(t) + self.phase)


@dataclass
class Trajectory:
    """Sampled truth: times, states ``(N+1, n_x)``, inputs and measurements ``(N+1, m)``."""

    t: np.ndarray
    x: np.ndarray
    u: np.ndarray
    y: np.ndarray

    @property
    def dt(self):
        return float(self.t[1] - self.t[0])


def n_steps(t_end, dt):
    """Number of Euler steps; ``dt`` must divide ``t_end``."""
    n = round(t_end / dt)
    if n < 1 or abs(n * dt - t_end) > 1e-9 * max(1.0, t_end):
        raise ValueError(f"dt={dt} does not divide t_end={t_end}")
    return n


def simulate_truth(x0, u_fn, t_end, noise, *, dt=0.01, p=DUFFING_P, rhs=None, h=None):
    """Euler-integrate the true system with additive noise.

    Process noise enters each step with standard deviation ``q_x * sqrt(dt)``;
    measurements are ``h(x_k) + v_k`` with ``v_k ~ N(0, r^2)``. Process and
    measurement noise use separate streams spawned from ``noise.seed``.
    """
    if rhs is None:
        rhs = lambda x, u: duffing_rhs(x, u, p)  # noqa: E731
    h = h or duffing_observation
    n = n_steps(t_end, dt)
    t = np.arange(n + 1) * dt
    u = np.asarray(u_fn(t), dtype=float) * np.ones(n + 1)
    x = np.empty((n + 1, len(x0)))
    x[0] = x0
    proc_rng, meas_rng = (np.random.default_rng(s) for s in np.random.SeedSequence(noise.seed).spawn(2))
    q = np.broadcast_to(np.asarray(noise.q_x, float), (len(x0),)) * np.sqrt(dt)
    w = proc_rng.standard_normal((n, len(x0))) * q
    with np.errstate(over="ignore", invalid="ignore"):
        for k in range(n):
            x[k + 1] = x[k] + dt * rhs(x[k], u[k]) + w[k]
            if not np.all(np.isfinite(x[k + 1])):
                raise NonFiniteOutput(f"true trajectory diverged at step {k + 1}")
    y_clean = np.atleast_2d(np.array([h(xk, uk) for xk, uk in zip(x, u)]))
    m = y_clean.shape[1]
    y = y_clean + meas_rng.standard_normal(y_clean.shape) * noise.r_std(m)
    return Trajectory(t=t, x=x, u=u, y=y)
