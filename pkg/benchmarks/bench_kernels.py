"""Compare the compiled and numpy kernel backends.

    python benchmarks/bench_kernels.py [--sizes 256 1024 4096] [--repeat 50]

Times the three kernels on random fields and one full T(alpha) solve per
backend, and checks that both backends agree.
"""
import argparse
import time
import timeit

import numpy as np

from plapbranch import kernels
from plapbranch.localmap import T, clear_cache
from plapbranch.mesh import build_interval
from plapbranch.problem import ProblemSpec


def _best(fn, repeat):
    return min(timeit.repeat(fn, number=1, repeat=repeat))


def bench_kernels(sizes, repeat, p=2.5):
    rng = np.random.default_rng(0)
    rows = []
    for M in sizes:
        m = build_interval(0.0, 1.0, M)
        u = np.sin(np.pi * m.nodes) + 0.01 * rng.random(m.size)
        out = {}
        for name in sorted(kernels.BACKENDS):
            kernels.set_backend(name)
            lo, dg, up = kernels.flux_jacobian(u, p, m.half_metric, m.h)
            rhs = rng.random(m.size)
            out[name] = {
                "divergence": _best(lambda: kernels.flux_divergence(u, p, m.half_metric, m.h), repeat),
                "jacobian": _best(lambda: kernels.flux_jacobian(u, p, m.half_metric, m.h), repeat),
                "tridiagonal": _best(lambda: kernels.solve_tridiagonal(lo, dg + 1.0, up, rhs), repeat),
                "value": kernels.flux_divergence(u, p, m.half_metric, m.h),
            }
        rows.append((M, out))
    return rows


def bench_solve(M, alpha, repeat):
    spec = ProblemSpec(2.0, 1.0, 0.5)
    m = build_interval(0.0, 1.0, M)
    res = {}
    for name in sorted(kernels.BACKENDS):
        kernels.set_backend(name)

        def run():
            clear_cache()
            return T(spec, m, alpha, use_cache=False)

        res[name] = (_best(run, repeat), run()[0].values)
    return res


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", type=int, nargs="+", default=[256, 1024, 4096, 16384])
    ap.add_argument("--repeat", type=int, default=30)
    ap.add_argument("--solve-M", type=int, default=512)
    args = ap.parse_args(argv)
    initial = kernels.BACKEND
    have = sorted(kernels.BACKENDS)
    print(f"backends: {', '.join(have)} (default {initial})")
    if len(have) < 2:
        print("compiled extension not built; only the numpy fallback is timed")

    print(f"\n{'M':>7} {'kernel':>12} " + " ".join(f"{b:>12}" for b in have) + "   speedup")
    for M, out in bench_kernels(args.sizes, args.repeat):
        for k in ("divergence", "jacobian", "tridiagonal"):
            times = [out[b][k] for b in have]
            sp = f"{out['python'][k] / out['cython'][k]:8.1f}x" if len(have) == 2 else ""
            print(f"{M:>7} {k:>12} " + " ".join(f"{t * 1e6:10.1f}us" for t in times) + f"  {sp}")
        if len(have) == 2:
            diff = np.max(np.abs(out["cython"]["value"] - out["python"]["value"]))
            print(f"{M:>7} {'max |diff|':>12} {diff:.2e}")

    t0 = time.perf_counter()
    res = bench_solve(args.solve_M, 1.0, max(3, args.repeat // 10))
    print(f"\nfull T(alpha=1) solve, M={args.solve_M}:")
    for b in have:
        print(f"  {b:>8}: {res[b][0] * 1e3:8.2f} ms")
    if len(have) == 2:
        print(f"  speedup {res['python'][0] / res['cython'][0]:.1f}x, "
              f"max field difference {np.max(np.abs(res['cython'][1] - res['python'][1])):.2e}")
    print(f"(total {time.perf_counter() - t0:.1f}s)")
    kernels.set_backend(initial)


if __name__ == "__main__":
    main()
