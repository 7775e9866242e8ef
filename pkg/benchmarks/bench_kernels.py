"""Compare the compiled kernel with the pure-Python state machines.

Both backends run the same seeded trials; the script checks the records agree
and reports wall time per iteration and the speed-up.

    python benchmarks/bench_kernels.py
    python benchmarks/bench_kernels.py --n 64 --iterations 20000 --repeats 3
"""
import argparse
import statistics
import sys
import time

from noisysemo.algorithms import AlgorithmConfig, Variant
from noisysemo.engine import HAVE_EXTENSION, simulate
from noisysemo.noise import NoiseSpec

CASES = [
    ("cached", Variant.CACHED, 0, lambda n: 0.25 / n),
    ("reeval", Variant.REEVAL, 0, lambda n: 0.1 / n**2),
    ("keep", Variant.KEEP, 1000, lambda n: 0.25 / n),
]


def time_backend(config, iterations, seed, backend, repeats):
    best, record = float("inf"), None
    for _ in range(repeats):
        start = time.perf_counter()
        record = simulate(config, iterations, seed, backend=backend)
        best = min(best, time.perf_counter() - start)
    return best, record


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, nargs="+", default=[32, 64])
    ap.add_argument("--iterations", type=int, default=20_000, help="iteration budget per trial")
    ap.add_argument("--repeats", type=int, default=3, help="best-of repeats per measurement")
    ap.add_argument("--seeds", type=int, default=3)
    args = ap.parse_args(argv)
    if not HAVE_EXTENSION:
        print("compiled kernel not built; reinstall with Cython available", file=sys.stderr)
        return 1
    print(f"{'variant':8} {'n':>5} {'iters':>8} {'python us/it':>13} {'compiled us/it':>15} {'speed-up':>9}")
    for name, variant, K, rule in CASES:
        for n in args.n:
            config = AlgorithmConfig(n, NoiseSpec(rule(n)), variant, K)
            py_rates, c_rates = [], []
            for seed in range(args.seeds):
                t_py, r_py = time_backend(config, args.iterations, seed, "python", args.repeats)
                t_c, r_c = time_backend(config, args.iterations, seed, "compiled", args.repeats)
                if r_py != r_c or r_py.population != r_c.population:
                    print(f"MISMATCH {name} n={n} seed={seed}", file=sys.stderr)
                    return 2
                steps = max(r_py.iterations, 1)
                py_rates.append(1e6 * t_py / steps)
                c_rates.append(1e6 * t_c / steps)
            py, c = statistics.median(py_rates), statistics.median(c_rates)
            print(f"{name:8} {n:>5} {args.iterations:>8} {py:>13.2f} {c:>15.3f} {py / c:>8.0f}x")
    return 0


if __name__ == "__main__":
    sys.exit(main())
