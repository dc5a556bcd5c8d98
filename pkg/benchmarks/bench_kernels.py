"""Compare the numba kernels with the numpy fallback.

Run with ``python3 benchmarks/bench_kernels.py``. Each row reports the best
of several repeats; the numba path is warmed up first so compile time is
excluded. Results are also checked for agreement.
"""

import argparse
import time

import numpy as np

from cuspbounds import _kernels
from cuspbounds.calculus.derivatives import partial_alpha
from cuspbounds.oracles import product_state
from cuspbounds.partition import partition_sum_error


def best_of(fn, repeat=5):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def bench_product(nvar, order, npts, rng):
    plan = _kernels.product_plan(nvar, order)
    a = rng.standard_normal((plan.size, npts))
    b = rng.standard_normal((plan.size, npts))
    _kernels.truncated_product(a, b, plan, use_numba=True)
    t_nb, r_nb = best_of(lambda: _kernels.truncated_product(a, b, plan, use_numba=True))
    t_np, r_np = best_of(lambda: _kernels.truncated_product(a, b, plan, use_numba=False))
    return t_nb, t_np, float(np.max(np.abs(r_nb - r_np)))


def bench_cutoff(order, npts, rng):
    t = rng.uniform(0, 1, npts)
    _kernels.cutoff_derivatives(t, order, use_numba=True)
    t_nb, r_nb = best_of(lambda: _kernels.cutoff_derivatives(t, order, use_numba=True))
    t_np, r_np = best_of(lambda: _kernels.cutoff_derivatives(t, order, use_numba=False))
    return t_nb, t_np, float(np.max(np.abs(r_nb - r_np)))


def bench_end_to_end(name, fn):
    saved = _kernels.USE_NUMBA
    try:
        _kernels.USE_NUMBA = True
        fn()
        t_nb, r_nb = best_of(fn, repeat=3)
        _kernels.USE_NUMBA = False
        t_np, r_np = best_of(fn, repeat=3)
    finally:
        _kernels.USE_NUMBA = saved
    return t_nb, t_np, float(np.max(np.abs(np.asarray(r_nb) - np.asarray(r_np))))


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--points", type=int, default=20_000)
    args = ap.parse_args()
    if not _kernels.numba_enabled():
        print("numba unavailable or disabled; both columns use numpy")
    rng = np.random.default_rng(0)
    rows = []
    for nvar, order in ((1, 8), (3, 4), (6, 3)):
        rows.append((f"truncated_product nvar={nvar} order={order}", *bench_product(nvar, order, args.points, rng)))
    rows.append(("cutoff_derivatives order=4", *bench_cutoff(4, args.points * 10, rng)))

    st = product_state(["1s", "2s"])
    x = rng.normal(size=(args.points // 4, 2, 3))
    rows.append(("partial_alpha |alpha|=4 (N=2)",
                 *bench_end_to_end("jet", lambda: partial_alpha(st.psi, x, [(2, 1, 0), (1, 0, 0)]))))
    rows.append(("partition sum N=4",
                 *bench_end_to_end("partition", lambda: partition_sum_error(4, 4000, seed=1)["max_error"])))

    print(f"{'workload':40s} {'numba [ms]':>11s} {'numpy [ms]':>11s} {'speedup':>8s} {'max diff':>10s}")
    for name, t_nb, t_np, diff in rows:
        print(f"{name:40s} {1e3 * t_nb:11.2f} {1e3 * t_np:11.2f} {t_np / t_nb:8.2f} {diff:10.2e}")


if __name__ == "__main__":
    main()
