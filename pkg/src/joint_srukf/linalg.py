"""Dense small-matrix primitives for square-root filtering.

Covariance square roots are plain lower-triangular ``ndarray`` objects with a
nonnegative diagonal, so that ``S @ S.T`` is the covariance and two factors of
the same matrix compare equal entrywise.
"""
import numpy as np

from ._backend import kernels
from .errors import DowndateBreakdown, NotPositiveDefinite

PD_FLOOR = 1e-12
DOWNDATE_TOL = 1e-14


def chol(P, *, sym_tol=1e-10):
    """Lower Cholesky factor of a symmetric positive definite matrix.

    Parameters
    ----------
    P : array_like, shape (n, n)
    sym_tol : float
        Allowed asymmetry relative to ``max|P|``.

    Raises
    ------
    NotPositiveDefinite
        If a pivot is at or below ``1e-12 * max|P|``; ``index`` is the
        failing pivot.
    """
    P = np.array(P, dtype=float, order="C", ndmin=2)
    if P.shape[0] != P.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {P.shape}")
    scale = np.max(np.abs(P)) if P.size else 0.0
    if np.max(np.abs(P - P.T), initial=0.0) > sym_tol * max(scale, 1.0):
        raise ValueError("matrix is not symmetric")
    L = np.zeros_like(P)
    idx = kernels.chol_lower(P, L, PD_FLOOR * scale)
    if idx >= 0:
        raise NotPositiveDefinite(idx, P[idx, idx] - L[idx, :idx] @ L[idx, :idx])
    return L


def qr_compress(block):
    """Triangular factor ``S`` (lower, nonnegative diagonal) with ``S S^T = B^T B``.

    ``block`` is ``r x c`` with ``r >= c``; rows are the scaled deviation
    vectors being summed into a covariance.
    """
    B = np.asarray(block, dtype=float)
    if B.ndim != 2 or B.shape[0] < B.shape[1]:
        raise ValueError(f"qr_compress needs a tall block, got shape {B.shape}")
    R = np.linalg.qr(B, mode="r")
    signs = np.where(np.diag(R) < 0.0, -1.0, 1.0)
    return np.ascontiguousarray((R * signs[:, None]).T)


def rank1_update(S, v, sign=1):
    """Return ``S'`` with ``S' S'^T = S S^T + sign * v v^T``.

    Downdates (``sign=-1``) use hyperbolic rotations and raise
    :class:`DowndateBreakdown` instead of clamping.
    """
    if sign not in (1, -1):
        raise ValueError("sign must be +1 or -1")
    L = np.array(S, dtype=float, order="C")
    w = np.array(v, dtype=float).ravel()
    if w.shape[0] != L.shape[0]:
        raise ValueError("vector length does not match factor dimension")
    idx = kernels.rank1_inplace(L, w, sign, DOWNDATE_TOL)
    if idx >= 0:
        raise DowndateBreakdown(idx)
    return L


def numerical_rank(M, tol=1e-8):
    """Number of singular values above ``tol`` times the largest one."""
    if tol <= 0:
        raise ValueError("tol must be positive")
    M = np.atleast_2d(np.asarray(M, dtype=float))
    if M.size == 0:
        return 0
    sv = np.linalg.svd(M, compute_uv=False)
    if sv[0] == 0.0:
        return 0
    return int(np.count_nonzero(sv > tol * sv[0]))


def psd_refactor(P, clip=1e-12):
    """Factor a symmetric matrix after clipping eigenvalues at ``clip * trace``.

    Used as the recovery path when a downdate or a covariance merge is not
    positive definite. The trace is taken over absolute eigenvalues so an
    indefinite input still gets a meaningful floor.
    """
    P = 0.5 * (P + P.T)
    w, V = np.linalg.eigh(P)
    floor = clip * max(np.sum(np.abs(w)), 1e-300)
    w = np.maximum(w, floor)
    Pc = (V * w) @ V.T
    try:
        return chol(0.5 * (Pc + Pc.T))
    except NotPositiveDefinite:
        return qr_compress((V * np.sqrt(w)).T)


def is_sqrt_factor(S, atol=0.0):
    """True when ``S`` is square, lower triangular, with nonnegative diagonal."""
    S = np.asarray(S)
    return (
        S.ndim == 2
        and S.shape[0] == S.shape[1]
        and np.all(np.abs(np.triu(S, 1)) <= atol)
        and np.all(np.diag(S) >= 0.0)
    )
