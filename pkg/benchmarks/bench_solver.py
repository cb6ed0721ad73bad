#!/usr/bin/env python3
"""Benchmark: compiled alternation kernel vs the pure-Python fallback.

Runs the same component solves through both kernels and reports wall time
and the relative objective gap.  Invoke from the repository root:

    python benchmarks/bench_solver.py
"""

import time

import numpy as np

import sier
import sier._cd_fallback as fallback
from sier import PenaltyPair, RandomStream, SolverConfig, cross_moment

try:
    import sier._cd as compiled
except ImportError:
    compiled = None


def make_instance(seed, n, p, q):
    g = RandomStream(seed).generator()
    x = g.standard_normal((n, p))
    x -= x.mean(axis=0)
    b = np.zeros((p, q))
    b[: p // 10 or 1] = g.standard_normal((p // 10 or 1, q))
    y = x @ b + 0.3 * g.standard_normal((n, q))
    return cross_moment(x, y)


def run_kernel(mod, cm, pen, iters=500, tol=1e-8):
    g = RandomStream(1).generator()
    alpha = np.ascontiguousarray(g.standard_normal(cm.p) * 0.1)
    r = np.ascontiguousarray(cm.z @ alpha)
    dmat = np.zeros((0, cm.p))
    e = np.zeros(0)
    t0 = time.perf_counter()
    its, conv, f = mod.alternate_solve(
        alpha, cm.zt, r, cm.mt, dmat, e, cm.s_diag, 0.0,
        pen.tau * (1 - pen.lam), pen.tau * pen.lam, iters, tol,
    )
    return time.perf_counter() - t0, its, f


def main():
    print(f"compiled extension available: {compiled is not None}")
    pen = PenaltyPair(0.5, 0.3)
    sizes = [(90, 100, 20), (90, 500, 3), (90, 1000, 100), (60, 2000, 50)]
    print(f"{'n':>5} {'p':>6} {'q':>5} {'compiled':>12} {'fallback':>12} {'speedup':>8}")
    for n, p, q in sizes:
        cm = make_instance(0, n, p, q)
        t_py, its_py, f_py = run_kernel(fallback, cm, pen)
        if compiled is not None:
            t_c, its_c, f_c = run_kernel(compiled, cm, pen)
            gap = abs(f_c - f_py) / max(abs(f_py), 1e-300)
            print(f"{n:>5} {p:>6} {q:>5} {t_c*1e3:>10.1f}ms {t_py*1e3:>10.1f}ms "
                  f"{t_py/t_c:>7.1f}x  (iters {its_c}/{its_py}, f gap {gap:.1e})")
        else:
            print(f"{n:>5} {p:>6} {q:>5} {'-':>12} {t_py*1e3:>10.1f}ms")

    print("\nend-to-end component extraction (fit_components, K=3):")
    cm = make_instance(0, 90, 500, 3)
    cfg = SolverConfig()
    t0 = time.perf_counter()
    dec = sier.fit_components(cm, pen, 3, cfg)
    print(f"  active kernel ({'compiled' if sier.COMPILED else 'fallback'}): "
          f"{time.perf_counter()-t0:.2f}s for K={dec.k}")


if __name__ == "__main__":
    main()
