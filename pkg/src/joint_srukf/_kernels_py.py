"""Pure-Python/numpy versions of the compiled kernels.

Same signatures and in-place semantics as the Cython module; used when the
extension is not built or ``JOINT_SRUKF_PURE_PYTHON`` is set.
"""
from math import hypot, sqrt


def chol_lower(P, L, floor):
    n = P.shape[0]
    for j in range(n):
        d = P[j, j] - L[j, :j] @ L[j, :j]
        if d <= floor:
            return j
        d = sqrt(d)
        L[j, j] = d
        L[j + 1:, j] = (P[j + 1:, j] - L[j + 1:, :j] @ L[j, :j]) / d
    return -1


def rank1_inplace(L, v, sign, rel_tol):
    n = L.shape[0]
    for k in range(n):
        vk = v[k]
        if vk == 0.0:
            continue
        d = L[k, k]
        if sign > 0:
            r = hypot(d, vk)
            c = d / r
            s = vk / r
            L[k, k] = r
            v[k] = 0.0
            a = L[k + 1:, k].copy()
            L[k + 1:, k] = c * a + s * v[k + 1:]
            v[k + 1:] = c * v[k + 1:] - s * a
        else:
            r2 = (d - vk) * (d + vk)
            if d <= 0.0 or r2 <= rel_tol * d * d:
                return k
            r = sqrt(r2)
            c = r / d
            s = vk / d
            L[k, k] = r
            v[k] = 0.0
            L[k + 1:, k] = (L[k + 1:, k] - s * v[k + 1:]) / c
            v[k + 1:] = c * v[k + 1:] - s * L[k + 1:, k]
    return -1

