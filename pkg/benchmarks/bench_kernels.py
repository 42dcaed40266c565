"""Time the numba kernels against the pure-numpy fallback.

The numpy numbers come from a child interpreter started with
BOSEDIMER_DISABLE_NUMBA=1, since the backend is fixed at import time.

    python3 benchmarks/bench_kernels.py [--N 2000] [--points 20000] [--repeat 3]
"""
import argparse
import json
import os
import subprocess
import sys
import time

import numpy as np


def best_of(fn, repeat):
    fn()  # warm-up (includes JIT compilation)
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def measure(N, points, steps, two_j, repeat):
    from bosedimer import kernels, model
    from bosedimer._accel import backend
    from bosedimer.ensemble import sample_cloud

    p = model.DimerParams.from_u(N, 5.0)
    H = model.build_hamiltonian(p)
    Hs = model.build_hamiltonian(model.DimerParams.from_u(100, 5.0))
    S0 = sample_cloud(model.DimerParams.from_u(40, 5.0), "Pi", points, seed=1).points

    def rk4():
        kernels.bloch_rk4(S0.copy(), 5.0, 0.0, 0.01, steps)

    return {
        "backend": backend(),
        "tridiag_eigh": best_of(lambda: kernels.tridiag_eigh(H.diag, H.off), repeat),
        "tridiag_eigh_small": best_of(lambda: kernels.tridiag_eigh(Hs.diag, Hs.off), 20 * repeat),
        "bloch_rk4": best_of(rk4, repeat),
        "multipole_threej_table": best_of(lambda: kernels.multipole_threej_table(two_j), repeat),
    }


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--N", type=int, default=1000, help="particle number for the eigensolver")
    ap.add_argument("--points", type=int, default=20_000, help="ensemble size for RK4")
    ap.add_argument("--steps", type=int, default=100, help="RK4 steps per call")
    ap.add_argument("--two-j", type=int, default=40, help="2j for the 3j table")
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--child", action="store_true", help=argparse.SUPPRESS)
    args = ap.parse_args()
    res = measure(args.N, args.points, args.steps, args.two_j, args.repeat)
    if args.child:
        print(json.dumps(res))
        return
    from bosedimer.kernels import QL_MAX_DIM

    env = dict(os.environ, BOSEDIMER_DISABLE_NUMBA="1")
    cmd = [sys.executable, __file__, "--child"] + [a for a in sys.argv[1:] if a != "--child"]
    out = subprocess.run(cmd, env=env, capture_output=True, text=True, check=True)
    ref = json.loads(out.stdout.strip().splitlines()[-1])
    print(f"tridiag_eigh at N={args.N} (LAPACK on both sides above n={QL_MAX_DIM}); "
          f"tridiag_eigh_small at N=100 (compiled QL vs LAPACK)")
    print(f"{'kernel':<24}{res['backend']:>12}{ref['backend']:>12}{'speedup':>10}")
    for k in ("tridiag_eigh_small", "tridiag_eigh", "bloch_rk4", "multipole_threej_table"):
        print(f"{k:<24}{res[k]:>11.4f}s{ref[k]:>11.4f}s{ref[k] / res[k]:>9.1f}x")


if __name__ == "__main__":
    main()
