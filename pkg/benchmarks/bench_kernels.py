"""Numba loop kernels against the vectorized numpy fallback.

    python3 benchmarks/bench_kernels.py [--repeat 200]

Part one times each kernel on the 13-bus feeder and on a 120-bus chain in one
process. Part two times a full EMPC solve in two fresh interpreters, one with
DEMPC_NUMBA=0, so the solver really runs on each backend.
"""

import argparse
import os
import subprocess
import sys
import timeit

import numpy as np
from scipy.linalg import lapack

from dempc import kernels
from dempc.cases import lebanon_case
from dempc.grid import Branch, Bus, Network, build_admittance

SOLVE = """
import time, warnings
warnings.simplefilter("ignore")
from dempc import kernels
from dempc.cases import lebanon_case, lebanon_day
from dempc.empc import assemble_empc
from dempc.nlp import solve_nlp
case = lebanon_case()
day = lebanon_day()[0]
P = assemble_empc(case.network, case.fleet, day.window(228, 5), case.horizon, x0=case.x0)
solve_nlp(P.to_nlp(), P.flat_start())
t0 = time.perf_counter()
for _ in range(3):
    k = solve_nlp(P.to_nlp(), P.flat_start())
print(kernels.backend, (time.perf_counter() - t0) / 3, k.objective)
"""


def chain_network(n):
    buses = tuple(Bus(i, is_reference=(i == 0)) for i in range(n))
    return Network(buses, tuple(Branch(i, i + 1, 0.01, 0.03, 1e-4) for i in range(n - 1)))


def bench_kernels(Y, repeat):
    n = Y.shape[0]
    rng = np.random.default_rng(0)
    vm, va = 0.95 + 0.1 * rng.random(n), 0.1 * rng.standard_normal(n)
    lp, lq = rng.standard_normal(n), rng.standard_normal(n)
    G, B = np.ascontiguousarray(Y.real), np.ascontiguousarray(Y.imag)
    M = rng.standard_normal((4 * n, 4 * n))
    lu, ipiv, _ = lapack.dsytrf(M + M.T, lower=1)
    calls = {
        "injections": lambda be: be.injections(vm, va, G, B),
        "jacobian": lambda be: be.jacobian(vm, va, G, B),
        "hessian": lambda be: be.hessian(vm, va, G, B, lp, lq),
        "inertia": lambda be: be.inertia(lu, ipiv, 1e-10),
    }
    rows = []
    for name, call in calls.items():
        times = {}
        for label, be in (("numba", kernels.loop), ("numpy", kernels.vectorized)):
            call(be)  # compile / warm caches
            times[label] = min(timeit.repeat(lambda: call(be), number=repeat, repeat=3)) / repeat
        rows.append((name, times["numba"], times["numpy"]))
    return rows


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=200)
    args = ap.parse_args()
    cases = {"13-bus feeder": lebanon_case().network.admittance,
             "120-bus chain": build_admittance(chain_network(120))}
    print(f"{'kernel':<12}{'size':<16}{'numba us':>12}{'numpy us':>12}{'speedup':>10}")
    for label, Y in cases.items():
        for name, tn, tp in bench_kernels(Y, args.repeat):
            print(f"{name:<12}{label:<16}{1e6 * tn:>12.1f}{1e6 * tp:>12.1f}{tp / tn:>10.1f}")
    print("\nfull T = 5 EMPC solve on the feeder (mean of 3)")
    for flag in ("1", "0"):
        env = dict(os.environ, DEMPC_NUMBA=flag)
        out = subprocess.run([sys.executable, "-c", SOLVE], env=env, capture_output=True, text=True,
                             check=True).stdout.split()
        print(f"  {out[0]:<6} {float(out[1]):.3f} s   objective {float(out[2]):.10g}")


if __name__ == "__main__":
    main()
