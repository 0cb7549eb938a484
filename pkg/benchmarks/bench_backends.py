"""Compare the compiled evaluation kernel against the pure-numpy fallback.

Measures throughput of both backends on identical random expression
programs, verifies they agree (exact fault codes, values to tight relative
tolerance), and optionally times an end-to-end ensemble fit under each
backend via subprocesses.

Usage:
    python benchmarks/bench_backends.py
    python benchmarks/bench_backends.py --rows 13,1024,262144 --trials 100
    python benchmarks/bench_backends.py --fit
"""

import argparse
import os
import statistics
import subprocess
import sys
import time

import numpy as np

import syran._kernel_py as pure
import syran.expr as ex
from syran.search import random_expression

try:
    import syran._kernel as compiled
except ImportError:  # pragma: no cover - benchmark still useful without it
    compiled = None


def random_programs(trials, rng):
    programs = []
    while len(programs) < trials:
        dim = int(rng.integers(1, 5))
        tree = random_expression(dim, 6, (-5.0, 5.0), rng)
        if ex.node_count(tree.root) >= 5:  # skip trivial leaves
            programs.append(tree)
    return programs


def check_agreement(programs, rng):
    """Exact fault-code agreement plus the distribution of value gaps.

    Rational arithmetic is bit-identical across backends; transcendentals
    (numpy SIMD vs scalar libm) differ in the last ulp, which chaotic
    compositions such as sin of an astronomically large power can amplify
    to visible size.  The tight quantile is the meaningful number here.
    """
    gaps = []
    mismatches = 0
    for tree in programs:
        rows = rng.uniform(-100.0, 100.0, size=(64, tree.dimension))
        ops, args, consts = tree.program
        cv, cc = compiled.eval_program(ops, args, consts, rows)
        pv, pc = pure.eval_program(ops, args, consts, rows)
        if not np.array_equal(cc, pc):
            mismatches += 1
            continue
        clean = cc == 0
        if clean.any():
            scale = np.maximum(1.0, np.abs(cv[clean]))
            gaps.extend((np.abs(cv[clean] - pv[clean]) / scale).tolist())
    gaps = np.asarray(gaps) if gaps else np.zeros(1)
    return gaps, mismatches


def time_backend(fn, programs, rows_by_dim, min_seconds=0.5):
    """Median evaluations/second over enough repetitions to be stable."""
    rates = []
    for _ in range(3):
        count = 0
        start = time.perf_counter()
        while (elapsed := time.perf_counter() - start) < min_seconds:
            for tree in programs:
                ops, args, consts = tree.program
                fn(ops, args, consts, rows_by_dim[tree.dimension])
                count += 1
        rates.append(count / elapsed)
    return statistics.median(rates)


def bench_kernels(args):
    rng = np.random.default_rng(args.seed)
    programs = random_programs(args.trials, rng)

    gaps, mismatches = check_agreement(programs, rng)
    within = float(np.mean(gaps <= 1e-12))
    print(f"agreement over {args.trials} random programs:")
    print(f"  fault-code mismatches : {mismatches}")
    print(f"  rows within 1e-12     : {within:.2%}")
    print(f"  p99 relative gap      : {np.quantile(gaps, 0.99):.3e}")
    print(f"  worst relative gap    : {gaps.max():.3e}  "
          "(ill-conditioned transcendental compositions amplify ulp-level "
          "libm differences)")
    if mismatches or within < 0.99:
        print("  WARNING: backends disagree beyond the documented contract")
    print()

    sizes = [int(s) for s in args.rows.split(",")]
    header = f"{'rows':>8}  {'compiled/s':>12}  {'python/s':>12}  {'speedup':>8}"
    print("program evaluations per second (median of 3):")
    print(header)
    for size in sizes:
        rows_by_dim = {
            d: np.ascontiguousarray(rng.uniform(-100.0, 100.0, size=(size, d)))
            for d in range(1, 5)
        }
        fast = time_backend(compiled.eval_program, programs, rows_by_dim)
        slow = time_backend(pure.eval_program, programs, rows_by_dim)
        print(f"{size:8d}  {fast:12.0f}  {slow:12.0f}  {fast / slow:7.1f}x")
    print()

    print("deviation-statistics calls per second (median of 3):")
    print(header)
    for size in sizes:
        rows_by_dim = {
            d: np.ascontiguousarray(rng.uniform(-100.0, 100.0, size=(size, d)))
            for d in range(1, 5)
        }
        fast = time_backend(compiled.deviation_stats, programs, rows_by_dim)
        slow = time_backend(pure.deviation_stats, programs, rows_by_dim)
        print(f"{size:8d}  {fast:12.0f}  {slow:12.0f}  {fast / slow:7.1f}x")


FIT_SCRIPT = """
import time, syran
from syran import Hyperparameters, EvolutionConfig
hp = Hyperparameters(ensemble_size=2,
                     evolution=EvolutionConfig(generations={budget},
                                               population_size=50),
                     master_seed=7)
start = time.perf_counter()
syran.fit(syran.kepler_dataset(), hp)
print(f"{{time.perf_counter() - start:.2f}}")
"""


def bench_fit(args):
    print(f"end-to-end two-member fit, {args.budget} evaluations per member:")
    for backend in ("compiled", "python"):
        env = dict(os.environ, SYRAN_BACKEND=backend)
        result = subprocess.run(
            [sys.executable, "-c", FIT_SCRIPT.format(budget=args.budget)],
            capture_output=True, text=True, env=env,
        )
        if result.returncode != 0:
            print(f"  {backend:>8}: FAILED\n{result.stderr}")
            continue
        print(f"  {backend:>8}: {result.stdout.strip()}s")


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--trials", type=int, default=200,
                        help="random programs per workload (default: 200)")
    parser.add_argument("--rows", default="13,256,16384",
                        help="comma-separated matrix heights (default: 13,256,16384)")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--fit", action="store_true",
                        help="also time an end-to-end fit under each backend")
    parser.add_argument("--budget", type=int, default=3000,
                        help="evaluation budget per member for --fit")
    args = parser.parse_args(argv)

    print(f"numpy {np.__version__}, python {sys.version.split()[0]}")
    if compiled is None:
        print("compiled kernel not built; nothing to compare")
        return 1
    bench_kernels(args)
    if args.fit:
        print()
        bench_fit(args)
    return 0


if __name__ == "__main__":
    sys.exit(main())
