"""Compiled vs numpy kernels: segment integrals, penalty objective, full solve.

Run with ``python3 benchmarks/bench_kernels.py [--repeat N]``.
"""
import argparse
import time

import numpy as np

from pargate import _backend, kernel, optimizer
from pargate.chain import mhz_to_rad, reference_chain
from pargate.optimizer import GateRequest, PenaltyProblem, PenaltyWeights


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        start = time.perf_counter()
        fn()
        times.append(time.perf_counter() - start)
    return min(times)


def with_backend(backend, fn):
    saved = kernel.kernels, optimizer.kernels
    kernel.kernels = optimizer.kernels = backend
    try:
        return fn()
    finally:
        kernel.kernels, optimizer.kernels = saved


def cases(chain, n_segments):
    request = GateRequest(pairs=((0, 3), (1, 4)), chi_targets=(np.pi / 4, np.pi / 4),
                          tau=250e-6, n_segments=n_segments, mu=float(mhz_to_rad(2.962)))
    omegas = chain.mode_freqs * 1e-6
    bounds = request.grid.boundaries_us
    system = kernel.build_system(chain, request.ions, request.mu, request.grid)
    problem = PenaltyProblem(system, request)
    x = problem.initial_guess()
    weights = PenaltyWeights(1.0, 10.0, 1e-6)
    mu_us = request.mu * 1e-6
    return {
        "mode_kernels": lambda k: k.mode_kernels(mu_us, omegas, bounds),
        "penalty_objective x100": lambda k: [with_backend(k, lambda: problem(x, weights))
                                             for _ in range(100)],
        "solve": lambda k: with_backend(k, lambda: optimizer.solve(chain, request)),
    }


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=5)
    parser.add_argument("--segments", type=int, default=60)
    args = parser.parse_args(argv)
    compiled, python = _backend.compiled_backend, _backend.python_backend
    if compiled is None:
        raise SystemExit("compiled kernels not built; run pip install -e . --no-build-isolation")
    chain = reference_chain()
    print(f"{'case':<24}{'cython ms':>12}{'python ms':>12}{'speedup':>10}")
    for name, fn in cases(chain, args.segments).items():
        tc = best_of(lambda: fn(compiled), args.repeat)
        tp = best_of(lambda: fn(python), args.repeat)
        print(f"{name:<24}{1e3 * tc:12.2f}{1e3 * tp:12.2f}{tp / tc:10.1f}")


if __name__ == "__main__":
    main()
