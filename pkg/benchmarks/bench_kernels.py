#!/usr/bin/env python3
"""Benchmark the compiled kernels against the pure-NumPy fallback.

Two workloads:
  * raw kernel: repeated single-qubit operator applications across state sizes
  * end to end: Monte Carlo sampling of a built-in scenario

Usage: python benchmarks/bench_kernels.py [--repeats N] [--samples N]
"""

import argparse
import math
import time

import numpy as np

from momentchain import _kernels as K
from momentchain.experiments import builtin_scenarios
from momentchain.scenario import parse_scenario, run_scenario


def _haar(rng, d):
    z = (rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))) / math.sqrt(2)
    q, r = np.linalg.qr(z)
    return q * (np.diag(r) / np.abs(np.diag(r)))


def bench_apply(backend: str, n_qubits: int, repeats: int) -> float:
    K.set_backend(backend)
    rng = np.random.default_rng(0)
    dims = (2,) * n_qubits
    amps = rng.normal(size=2**n_qubits) + 1j * rng.normal(size=2**n_qubits)
    amps /= np.linalg.norm(amps)
    gate = _haar(rng, 2)
    K.apply_matrix(amps, gate, dims, (0,))  # warm the index cache
    start = time.perf_counter()
    for i in range(repeats):
        amps = K.apply_matrix(amps, gate, dims, (i % n_qubits,))
    return time.perf_counter() - start


def bench_sampling(backend: str, samples: int) -> float:
    K.set_backend(backend)
    scenario = parse_scenario(builtin_scenarios()["epr-alice"])
    start = time.perf_counter()
    run_scenario(scenario, samples=samples, seed=1)
    return time.perf_counter() - start


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeats", type=int, default=20_000,
                    help="gate applications per kernel measurement")
    ap.add_argument("--samples", type=int, default=20_000,
                    help="trajectories for the end-to-end measurement")
    args = ap.parse_args()

    backends = K.available_backends()
    if "cython" not in backends:
        print("compiled backend not built; run `pip install -e . --no-build-isolation`")

    print(f"backends: {', '.join(backends)}\n")
    print(f"{'workload':32s}" + "".join(f"{b:>12s}" for b in backends) + f"{'speedup':>10s}")

    original = K.backend()
    try:
        for n_qubits in (3, 6, 10, 14):
            times = {b: bench_apply(b, n_qubits, args.repeats) for b in backends}
            rate = {b: args.repeats / t for b, t in times.items()}
            row = f"apply 1q gate, {n_qubits:2d} qubits ".ljust(32)
            row += "".join(f"{rate[b] / 1e3:9.0f}k/s" for b in backends)
            if len(backends) == 2:
                row += f"{times['python'] / times['cython']:9.2f}x"
            print(row)

        times = {b: bench_sampling(b, args.samples) for b in backends}
        row = f"sample pair scenario x{args.samples} ".ljust(32)
        row += "".join(f"{times[b]:10.2f}s " for b in backends)
        if len(backends) == 2:
            row += f"{times['python'] / times['cython']:8.2f}x"
        print(row)
    finally:
        K.set_backend(original)


if __name__ == "__main__":
    main()
