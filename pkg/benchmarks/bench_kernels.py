"""Compare the compiled and numpy kernel backends.

    python3 benchmarks/bench_kernels.py [--repeat 5]

Times each kernel on workloads the package actually runs (dyadic tables at
2-D/1-D solution sizes, the Hölder quotient scan used by check_assumptions)
and checks that both backends return the same numbers.
"""

import argparse
import time

import numpy as np

from ddform import _kernels_py

try:
    from ddform import _kernels as compiled
except ImportError:  # extension not built
    compiled = None


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t)
    return min(times), out


def workloads(rng):
    radii = 0.25 * 0.5 ** np.arange(13)
    for d, n, centers in [(2, 257, 129), (2, 1025, 8), (1, 4097, 64), (3, 129, 4)]:
        dev = np.abs(rng.standard_normal((n,) * d))
        xs = rng.uniform(-0.5, 0.5, (centers, d))
        lower = np.full(d, -1.0)
        h = 2.0 / (n - 1)

        def run(mod, dev=dev, xs=xs, lower=lower, h=h):
            return [mod.ball_max(dev, lower, h, x, radii) for x in xs]

        yield f"ball_max d={d} n={n} x{centers}", run
    for m, q in [(441, 4), (1331, 9)]:
        pts = rng.uniform(-1, 1, (m, 2 if q == 4 else 3))
        vals = rng.standard_normal((m, q))

        def run(mod, pts=pts, vals=vals):
            return mod.holder_quotient_max(vals, pts, 0.3)

        yield f"holder_quotient m={m} q={q}", run


def same(a, b):
    if isinstance(a, list):
        return all(same(x, y) for x, y in zip(a, b))
    if isinstance(a, tuple):
        return all(np.array_equal(x, y) for x, y in zip(a, b))
    return abs(a - b) <= 1e-12 * max(1.0, abs(a))


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    rng = np.random.default_rng(args.seed)
    print(f"{'workload':<34}{'python [s]':>12}{'cython [s]':>12}{'speedup':>10}  agree")
    for name, run in workloads(rng):
        tp, out_p = best_of(lambda: run(_kernels_py), args.repeat)
        if compiled is None:
            print(f"{name:<34}{tp:>12.4f}{'-':>12}{'-':>10}  -")
            continue
        tc, out_c = best_of(lambda: run(compiled), args.repeat)
        print(f"{name:<34}{tp:>12.4f}{tc:>12.4f}{tp / tc:>9.1f}x  {same(out_p, out_c)}")


if __name__ == "__main__":
    main()
