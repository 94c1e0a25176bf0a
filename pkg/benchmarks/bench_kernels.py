"""Time the integrator kernels with and without numba.

The JIT switch is read at import, so each path runs in its own interpreter:

    python3 benchmarks/bench_kernels.py            # both paths, table
    python3 benchmarks/bench_kernels.py --periods 50 --repeat 5

Compile time is excluded (one warm-up call per kernel before timing).
"""

import argparse
import json
import os
import subprocess
import sys

CHILD = r"""
import json, sys, time
import numpy as np
from qlienard import _jit, kernels
from qlienard.integrate import split_period

periods, repeat = int(sys.argv[1]), int(sys.argv[2])
prm = (-0.5, 2.0, 0.1, 0.0, 5.0, 1.0)
pa, pb = split_period(1.0)
T = 2 * np.pi

cases = {
    "dp5_trajectory": lambda n: kernels.dp5_trajectory(1, prm, 0.0, n * T, 0.1, 0.1, 1e-9, 1e-12, 10**8, 0.0),
    "dp5_strobe": lambda n: kernels.dp5_strobe(1, prm, 0.0, 0.1, 0.1, pa, pb, n, 1, 1e-9, 1e-12, 10**8, 0.0),
    "dp5_lyapunov": lambda n: kernels.dp5_lyapunov(1, prm, 0.0, 0.1, 0.1, 1e-8, T, n, 1e-9, 1e-12, 10**8, 0.0),
    "rk4_trajectory": lambda n: kernels.rk4_trajectory(1, prm, 0.0, n * T, 0.1, 0.1, 1e-2, 10**8),
}
out = {"jit": _jit.USE_NUMBA}
for name, fn in cases.items():
    fn(1)
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn(periods)
        best = min(best, time.perf_counter() - t0)
    out[name] = best
json.dump(out, sys.stdout)
"""


def run(no_jit, periods, repeat):
    env = dict(os.environ)
    if no_jit:
        env["QLIENARD_NO_JIT"] = "1"
    else:
        env.pop("QLIENARD_NO_JIT", None)
    proc = subprocess.run(
        [sys.executable, "-c", CHILD, str(periods), str(repeat)], env=env, capture_output=True, text=True, check=True
    )
    return json.loads(proc.stdout)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--periods", type=int, default=20, help="forcing periods per kernel call")
    ap.add_argument("--repeat", type=int, default=3, help="timed repetitions (best is kept)")
    args = ap.parse_args(argv)

    fast = run(False, args.periods, args.repeat)
    slow = run(True, args.periods, args.repeat)
    if not fast["jit"]:
        print("numba unavailable: both columns are the interpreted path")
    print(f"{'kernel':<16} {'numba [s]':>11} {'python [s]':>11} {'speedup':>9}")
    for name in ("dp5_trajectory", "dp5_strobe", "dp5_lyapunov", "rk4_trajectory"):
        print(f"{name:<16} {fast[name]:>11.4f} {slow[name]:>11.4f} {slow[name] / fast[name]:>8.1f}x")


if __name__ == "__main__":
    main()
