"""Compare the compiled and numpy kernel backends.

Usage::

    python benchmarks/bench_kernels.py [--repeat N]

Times the two kernels (Cholesky and rank-1 update/downdate) at a few
dimensions, then a 1000-step joint filter run on the Duffing benchmark with
each backend swapped in.
"""
import argparse
import timeit

import numpy as np

from joint_srukf import _kernels_py, linalg

try:
    from joint_srukf import _kernels as _kernels_c
except ImportError:
    _kernels_c = None


def spd(n, rng):
    A = rng.standard_normal((n, n))
    return A @ A.T + n * np.eye(n)


def bench_kernels(mod, n, repeat, rng):
    P = spd(n, rng)
    S = np.linalg.cholesky(P)
    v = 0.1 * rng.standard_normal(n)
    L = np.zeros_like(P)

    def chol():
        mod.chol_lower(P, L, 0.0)

    def rank1():
        mod.rank1_inplace(S.copy(), v.copy(), 1, 1e-14)
        mod.rank1_inplace(S.copy(), v.copy(), -1, 1e-14)

    t_chol = min(timeit.repeat(chol, number=200, repeat=repeat)) / 200
    t_rank1 = min(timeit.repeat(rank1, number=200, repeat=repeat)) / 200
    return t_chol, t_rank1


def bench_filter(mod, repeat):
    from joint_srukf.config import ExperimentConfig
    from joint_srukf.experiment import run_observer, simulate

    cfg = ExperimentConfig.from_dict()
    traj = simulate(cfg, 0)
    saved = linalg.kernels
    linalg.kernels = mod
    try:
        times = [run_observer(cfg, "joint", traj).wall_clock for _ in range(repeat)]
    finally:
        linalg.kernels = saved
    return min(times)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)
    backends = [("python", _kernels_py)]
    if _kernels_c is not None:
        backends.insert(0, ("cython", _kernels_c))
    else:
        print("compiled kernels not built; timing the numpy fallback only")

    print(f"{'kernel':<10}{'n':>4}" + "".join(f"{name:>14}" for name, _ in backends) + ("   speedup" if len(backends) == 2 else ""))
    for n in (2, 11, 30, 100):
        res = [bench_kernels(mod, n, args.repeat, np.random.default_rng(n)) for _, mod in backends]
        for k, label in enumerate(("chol", "rank1 +/-")):
            row = f"{label:<10}{n:>4}" + "".join(f"{r[k] * 1e6:>12.1f}us" for r in res)
            if len(res) == 2:
                row += f"{res[1][k] / res[0][k]:>9.1f}x"
            print(row)
    res = [bench_filter(mod, args.repeat) for _, mod in backends]
    row = f"{'filter':<10}{'':>4}" + "".join(f"{r:>13.3f}s" for r in res)
    if len(res) == 2:
        row += f"{res[1] / res[0]:>9.1f}x"
    print(row + "   (joint observer, 1000 steps)")


if __name__ == "__main__":
    main()
