"""Time each hot kernel under numba and under plain numpy.

    python benchmarks/bench_kernels.py [--repeat N]

Compilation is excluded: every kernel is called once before timing.
"""
import argparse
import time

import numpy as np

from blochforge import kernels
from blochforge._accel import configure_threads


def workloads():
    rng = np.random.default_rng(0)
    coef = (rng.normal(size=(100_000, 4)) * 40).astype(complex)
    dts = rng.uniform(0, 0.05, 100_000)
    psi = np.array([1.0 + 0j, 0j])
    taus = np.linspace(0, 0.3, 100_000)
    hs = np.array([2 * np.pi * np.array([[5, 10], [10, -5]], dtype=complex)])
    pulse = (np.eye(2) - 1j * np.array([[0, 1], [1, 0]])) / np.sqrt(2)
    offsets = rng.standard_cauchy(8000) * 0.84
    ramsey_taus = np.arange(61) * 0.005
    dg = np.linspace(0, 1, 200)
    T = np.linspace(0.01, 0.12, 200)
    return {
        "propagators (1e5 segments)": lambda f: f.propagators(coef, dts),
        "sample_states (1e5 samples)": lambda f: f.sample_states(coef[0], psi, taus),
        "rk4 (1e5 steps)": lambda f: f.rk4(hs, np.array([1.0]), psi, 1e-5),
        "ramsey_ensemble (61 x 8000)": lambda f: f.ramsey_ensemble(pulse, 10.0, ramsey_taus, offsets),
        "pt_half_trace_grid (200 x 200)": lambda f: f.pt_half_trace_grid(8.5, dg, T, 0.5),
    }


def best_of(fn, repeat):
    fn()
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5, help="timed runs per kernel [count]")
    args = ap.parse_args()
    configure_threads()
    print(f"{'kernel':<34}{'numba [ms]':>12}{'numpy [ms]':>12}{'speedup':>10}")
    for name, call in workloads().items():
        jit = best_of(lambda: call(kernels.JIT), args.repeat)
        ref = best_of(lambda: call(kernels.NUMPY), args.repeat)
        print(f"{name:<34}{jit * 1e3:>12.2f}{ref * 1e3:>12.2f}{ref / jit:>9.2f}x")


if __name__ == "__main__":
    main()
