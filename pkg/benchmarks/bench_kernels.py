#!/usr/bin/env python3
"""Benchmark the compiled iteration kernels against the pure-Python loops.

Runs the randomized-block and full-block solvers on representative affine
instances with both backends and reports steps/second plus the speedup.

    python benchmarks/bench_kernels.py [--iterations N] [--repeat R]
"""

import argparse
import time

import numpy as np

import blockprox as bp
from blockprox import backends
from blockprox.solvers import BsmpConfig, SmpConfig, StepsizeSchedule, run_bsmp, run_smp


def time_run(fn, problem, config, backend, repeat):
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn(problem, config, backend=backend)
        best = min(best, time.perf_counter() - t0)
    return best


def bench_case(label, fn, problem, config, iterations, repeat):
    t_py = time_run(fn, problem, config, "python", repeat)
    row = f"{label:34s} python {iterations / t_py:12.0f} steps/s"
    if backends.HAVE_COMPILED:
        t_c = time_run(fn, problem, config, "compiled", repeat)
        row += f"   compiled {iterations / t_c:12.0f} steps/s   speedup {t_py / t_c:6.1f}x"
    print(row)


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--iterations", type=int, default=20_000)
    parser.add_argument("--repeat", type=int, default=3)
    args = parser.parse_args()

    if not backends.HAVE_COMPILED:
        print("compiled extension not available; timing the python loops only")

    K = args.iterations
    sched_h = StepsizeSchedule("harmonic", 8.0)
    sched_s = StepsizeSchedule("inv_sqrt", 1.0)

    strong = bp.make_strongly_monotone_affine(
        d=8, block_size=4, mu=0.5, l_bound=1.0, noise=0.1, seed=1, halfwidth=0.1
    )
    scaled = bp.make_strictly_pseudo_monotone(
        bp.make_strongly_monotone_affine(4, 2, 1.0, 2.0, 0.05, seed=2)
    )
    smp_prob = bp.make_monotone_affine(3, 2, noise=1.0, psd_weight=0.05, seed=3)

    bench_case(
        "block solver, affine d=8 n=32",
        run_bsmp, strong, BsmpConfig(sched_h, K, seed=0), K, args.repeat,
    )
    bench_case(
        "block solver + averaging",
        run_bsmp, strong, BsmpConfig(sched_h, K, seed=0, averaging_exponent=0.0),
        K, args.repeat,
    )
    bench_case(
        "block solver, sin-scaled map",
        run_bsmp, scaled, BsmpConfig(sched_h, K, seed=0), K, args.repeat,
    )
    bench_case(
        "full-block solver, affine n=6",
        run_smp, smp_prob, SmpConfig(sched_s, K, seed=0, averaging_exponent=0.0),
        K, args.repeat,
    )


if __name__ == "__main__":
    main()
