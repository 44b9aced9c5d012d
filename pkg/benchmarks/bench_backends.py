"""Compare the compiled and NumPy backends on the two hot loops.

Usage: python benchmarks/bench_backends.py [--repeat N]
"""
import argparse
import timeit

import numpy as np

from qrcsl import _accel
from qrcsl.free_rates import TwoPacketState
from qrcsl.trajectories import Grid1D, build_collapse_operators, packet_state


def smear_case(module):
    z = np.random.default_rng(0).standard_normal((200_000, 8))
    seps = np.array([0.0, 1.0, 2.0, 4.0, 8.0, 10.0])
    return lambda: module.smear_integrand(z, seps, 10.0, 0.15)


def trajectory_case(module):
    grid = Grid1D(64, 0.3, 0.05)
    ops = build_collapse_operators(grid)
    psi0 = packet_state(grid, TwoPacketState(10.0, 0.5)).amplitudes
    noise = np.random.default_rng(1).standard_normal((64, 20, ops.rows.shape[0]))
    left = grid.x < 0
    return lambda: module.csl_trajectory_chunk(psi0, ops.rows, grid.dx, grid.dt, noise, 5, False, left)


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args(argv)
    backends = ["python"] + (["cython"] if _accel.BACKEND == "cython" else [])
    if len(backends) == 1:
        print("compiled extension not built; timing the NumPy backend only")
    print(f"{'kernel':<24}{'backend':<10}{'best [ms]':>12}{'speedup':>10}")
    for name, case in (("smear_integrand", smear_case), ("csl_trajectory_chunk", trajectory_case)):
        times = {}
        for b in backends:
            fn = case(_accel.backend_module(b))
            fn()
            times[b] = min(timeit.repeat(fn, number=1, repeat=args.repeat))
        for b in backends:
            print(f"{name:<24}{b:<10}{1e3 * times[b]:>12.2f}{times['python'] / times[b]:>10.2f}")


if __name__ == "__main__":
    main()
