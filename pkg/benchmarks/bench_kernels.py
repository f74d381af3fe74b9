"""Compare the numba kernels against the numpy/python fallback.

Times the filler scan on dense windows of several sizes and the register
machine on a counting loop, then a full engine run under each path.  Both
paths must agree; the script exits nonzero if they do not.

    python benchmarks/bench_kernels.py --repeat 5
"""

import argparse
import sys
import time

import numpy as np

from trapsim import _accel
from trapsim.engine import run
from trapsim.oracle import Inc, JzDec, _compile
from trapsim.scenario import Scenario


def best_of(fn, repeat):
    best = float("inf")
    out = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def random_window(n, rng):
    theta = rng.random((n, n)) < 0.5
    lam = rng.random((n, n)) < 0.5
    frozen = rng.random((n, n)) < 0.01
    trap_m = np.where(rng.random(n) < 0.1, rng.integers(0, n, n), -1).astype(np.int64)
    return theta, lam, frozen, trap_m


def bench_filler(sizes, repeat, rng):
    print(f"{'filler scan':<24}{'numba s':>12}{'numpy s':>12}{'speedup':>10}")
    agree = True
    for n in sizes:
        args = random_window(n, rng)
        t_nb, got_nb = best_of(lambda: _accel.filler_scan(n - 1, *args, use_numba=True), repeat)
        t_np, got_np = best_of(lambda: _accel.filler_scan(n - 1, *args, use_numba=False), repeat)
        agree &= all(np.array_equal(a, b) for a, b in zip(got_nb, got_np))
        print(f"{f'window {n}x{n}':<24}{t_nb:>12.5f}{t_np:>12.5f}{t_np / t_nb:>10.1f}")
    return agree


def bench_machine(inputs, repeat):
    # r1 := 2 * r0 by draining r0, then move back; about 6 steps per unit
    program = (JzDec(0, 4), Inc(1), Inc(1), JzDec(2, 0), JzDec(1, 7), Inc(0), JzDec(2, 4))
    code = _compile(program)
    print(f"{'register machine':<24}{'numba s':>12}{'python s':>12}{'speedup':>10}")
    agree = True
    for x in inputs:
        budget = 10 * x + 20
        call = lambda nb: _accel.run_program(code.ops, code.regs, code.targets, code.nregs, x, budget, use_numba=nb)
        t_nb, got_nb = best_of(lambda: call(True), repeat)
        t_py, got_py = best_of(lambda: call(False), repeat)
        agree &= got_nb == got_py and got_nb[1] == 2 * x
        print(f"{f'input {x}':<24}{t_nb:>12.5f}{t_py:>12.5f}{t_py / t_nb:>10.1f}")
    return agree


def bench_engine(stages, repeat):
    print(f"{'engine run':<24}{'numba s':>12}{'numpy s':>12}{'speedup':>10}")
    scenario = Scenario(stages=stages)
    t_nb, (_, tr_nb) = best_of(lambda: run(scenario, use_numba=True), repeat)
    t_np, (_, tr_np) = best_of(lambda: run(scenario, use_numba=False), repeat)
    print(f"{f'empty, S={stages}':<24}{t_nb:>12.5f}{t_np:>12.5f}{t_np / t_nb:>10.1f}")
    return tr_nb == tr_np


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=3)
    parser.add_argument("--sizes", type=int, nargs="+", default=[64, 256, 1024, 2048])
    parser.add_argument("--inputs", type=int, nargs="+", default=[100, 10_000, 1_000_000])
    parser.add_argument("--stages", type=int, default=200)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args(argv)

    if not _accel.USE_NUMBA:
        print("numba is unavailable or disabled (TRAPSIM_DISABLE_NUMBA); nothing to compare")
        return 0
    _accel.warmup()
    rng = np.random.default_rng(args.seed)
    ok = bench_filler(args.sizes, args.repeat, rng)
    print()
    ok &= bench_machine(args.inputs, args.repeat)
    print()
    ok &= bench_engine(args.stages, max(2, args.repeat))
    print("\npaths agree" if ok else "\nPATHS DISAGREE")
    return 0 if ok else 1


if __name__ == "__main__":
    sys.exit(main())
