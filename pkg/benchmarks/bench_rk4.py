"""Time the compiled RK4 kernel against the numpy fallback.

    python benchmarks/bench_rk4.py [--steps 3000] [--repeat 3]

Both kernels integrate the same random triple with H = I; the script
reports the best wall time of each, the speedup, and the max difference
between the two trajectories.
"""
import argparse
import time

import numpy as np

from dyncanon import _kernels
from dyncanon.triple import SignatureJ, random_admissible


def best_of(fn, repeat):
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--steps", type=int, default=3000)
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--sizes", default="1:1:1,3:2:2,4:2:2")
    args = ap.parse_args(argv)

    if _kernels.BACKEND != "cython":
        print("compiled kernel unavailable; only the numpy fallback can be timed")
    print(f"{'n':>3} {'m':>3} {'steps':>6} {'numpy [s]':>10} {'cython [s]':>11} {'speedup':>8} {'max diff':>10}")
    for spec in args.sizes.split(","):
        n, m1, m2 = map(int, spec.split(":"))
        sig = SignatureJ(m1, m2)
        t = random_admissible(n, sig, seed=0, method="inertia" if n <= m1 + m2 else "lyapunov")
        h = 1.0 / args.steps
        Hs = np.broadcast_to(np.eye(t.m, dtype=complex), (2 * args.steps + 1, t.m, t.m))
        call = (t.A, t.Pi0, t.S0, sig.diag, np.ascontiguousarray(Hs), h, args.steps)
        tp, outp = best_of(lambda: _kernels.rk4_trajectory_py(*call), args.repeat)
        if _kernels.BACKEND == "cython":
            tc, outc = best_of(lambda: _kernels.rk4_trajectory(*call), args.repeat)
            diff = max(np.max(np.abs(a - b)) for a, b in zip(outp[:3], outc[:3]))
            print(f"{n:>3} {t.m:>3} {args.steps:>6} {tp:>10.4f} {tc:>11.4f} {tp / tc:>8.1f} {diff:>10.1e}")
        else:
            print(f"{n:>3} {t.m:>3} {args.steps:>6} {tp:>10.4f} {'-':>11} {'-':>8} {'-':>10}")


if __name__ == "__main__":
    main()
