"""Acceptance criteria, one test per criterion, each printing a PASS/FAIL line.

Run directly (``python3 tests/test_acceptance.py``) for the summary alone;
under pytest the lines are collected in RESULTS and shown in the terminal
summary by conftest.py. Each criterion's runtime limit is part of its verdict.
"""

import math
import sys
import time
from contextlib import contextmanager
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from corpus import CORPUS, FD_ALPHAS, X0  # noqa: E402
from cuspbounds.calculus.derivatives import partial_alpha  # noqa: E402
from cuspbounds.calculus.finite_diff import fd_cross_check  # noqa: E402
from cuspbounds.config import ClusterSet, MultiIndex, PotentialSpec  # noqa: E402
from cuspbounds.density import (  # noqa: E402
    density_partial,
    rho_apriori_checks,
    rho_far_field,
    rho_weighted_lp_scan,
    verify_rho_pointwise,
)
from cuspbounds.geometry import dist_to_sigma  # noqa: E402
from cuspbounds.jastrow import (  # noqa: E402
    AlphaVariant,
    ClusterVariant,
    TildeVariant,
    build_system,
    regularized_residual,
    vanishing_sweep,
)
from cuspbounds.oracles import eigen_residual, hydrogen_ground, product_state  # noqa: E402
from cuspbounds.partition import generate_partition, partition_sum_error, verify_support_control  # noqa: E402
from cuspbounds.verify import (  # noqa: E402
    Ray,
    apriori_sup_ratio,
    approach_centers,
    random_centers,
    scaling_exponent,
    verify_main_theorem,
    verify_parallel,
    weighted_sobolev_scan,
)

RESULTS: list[str] = []


@contextmanager
def criterion(number: int, title: str, limit_s: float):
    """Collects failures, times the block, prints one line and fails the test if needed."""
    problems: list[str] = []
    t0 = time.perf_counter()
    yield problems
    dt = time.perf_counter() - t0
    if dt > limit_s:
        problems.append(f"runtime {dt:.1f}s exceeds {limit_s:.0f}s")
    verdict = "PASS" if not problems else "FAIL"
    line = f"{verdict}  criterion {number:2d}: {title} ({dt:.1f}s)"
    if problems:
        line += " -- " + "; ".join(problems[:5])
    RESULTS.append(line)
    print(line)
    assert not problems, line


def _off_sigma(rng, n_points, n, min_dist=0.05):
    out = np.empty((0, n, 3))
    while out.shape[0] < n_points:
        x = rng.normal(scale=1.5, size=(4 * n_points, n, 3))
        out = np.concatenate([out, x[dist_to_sigma(x) >= min_dist]])
    return out[:n_points]


def _flat(n, electron, a3):
    e = [0] * (3 * n)
    e[3 * (electron - 1): 3 * electron] = a3
    return MultiIndex(tuple(e))


def test_criterion_01_partition_of_unity():
    with criterion(1, "partition of unity sums to one, N = 2..5", 30) as bad:
        for n in (2, 3, 4, 5):
            out = partition_sum_error(n, 10**4, seed=100 + n)
            if not out["max_error"] <= 1e-12:
                bad.append(f"N={n} max error {out['max_error']:.2e}")


def test_criterion_02_support_control():
    with criterion(2, "support control ratios <= 4^(N+1), N = 2, 3", 60) as bad:
        for n in (2, 3):
            for i, idx in enumerate(generate_partition(n)):
                rep = verify_support_control(idx, n=10**4, seed=200 + 10 * n + i)
                if not rep["pass"]:
                    bad.append(f"{idx}: {rep['ratios']}")


def test_criterion_03_vanishing_derivatives():
    with criterion(3, "vanishing derivatives of F and K", 30) as bad:
        spec = PotentialSpec.atomic(3.0, 3)
        x = np.random.default_rng(3).normal(size=(100, 3, 3))
        out = vanishing_sweep(spec, x, max_order=3)
        if not out["max"] <= 1e-10:
            bad.append(f"max {out['max']:.2e}")


def test_criterion_04_oracle_residuals():
    with criterion(4, "eigen and transformed-equation residuals <= 1e-8", 30) as bad:
        states = [hydrogen_ground(1.0), hydrogen_ground(2.0), product_state(["1s", "2s"]),
                  product_state(["1s", "2s", ("1s", 2.0)])]
        for E, st in zip((-0.25, -1.0), states):
            if abs(st.E - E) > 1e-14:
                bad.append(f"hydrogen energy {st.E} != {E}")
        rng = np.random.default_rng(4)
        for st in states:
            n = st.n_electrons
            x = _off_sigma(rng, 100, n)
            worst = float(np.max(eigen_residual(st, x)))
            for var in (TildeVariant(), AlphaVariant(_flat(n, 1, (1, 0, 0))), ClusterVariant(ClusterSet([1], n))):
                res = regularized_residual(build_system(var, st.spec, st.E), st.psi, x)
                worst = max(worst, float(np.max(res)))
            if not worst <= 1e-8:
                bad.append(f"N={n} residual {worst:.2e}")


def test_criterion_05_sharp_exponents():
    with criterion(5, "sharp scaling exponents 1-|alpha| +- 0.05 on hydrogen", 10) as bad:
        h = hydrogen_ground(1.0)
        for a in [(1, 0, 0), (0, 2, 0), (0, 0, 2), (1, 2, 0), (0, 4, 0), (0, 2, 2)]:
            rep = scaling_exponent(h, a, Ray.axis(1), mode="sharp", tol=0.05)
            if not rep.passed:
                bad.append(f"alpha={a} slope {rep.slope:.4f} target {rep.target}")


def test_criterion_06_ball_norm_ratios():
    with criterion(6, "ball-norm ratios bounded without trend over 3 decades", 300) as bad:
        cases = [(hydrogen_ground(1.0), [(0, 2, 0), (1, 2, 0)]),
                 (product_state(["1s", "1s"]), [_flat(2, 1, (0, 2, 0)), _flat(2, 1, (1, 2, 0))])]
        for st, alphas in cases:
            centers = approach_centers(st.n_electrons, np.logspace(-3, 0, 16), seed=6)
            for a in alphas:
                for p in (2.0, math.inf):
                    tab = verify_main_theorem(st, a, p, 0.25, 0.5, centers, budget=10**5, seed=61)
                    if not tab.passed:
                        s = tab.stats
                        bad.append(f"N={st.n_electrons} alpha={a} p={p}: spread {s['spread']:.2f} tau {s['tau']:.2f}")


def test_criterion_07_cluster_ratios():
    with criterion(7, "cluster ratios bounded as |x1-x2| -> 0", 180) as bad:
        st = product_state(["1s", "1s"])
        t = np.logspace(-3, 0, 16)
        centers = approach_centers(2, t, kind="pair", seed=7)
        for beta in [(2, 0, 0), (1, 1, 0)]:
            tab = verify_parallel(st, [1, 2], beta, 2.0, 0.25, 0.5, centers, budget=10**5, seed=71, trend=t)
            if not tab.passed:
                bad.append(f"beta={beta}: spread {tab.stats['spread']:.2f} tau {tab.stats['tau']:.2f}")


def test_criterion_08_sobolev_thresholds():
    with criterion(8, "weighted Sobolev thresholds bracketed at +-0.2", 10) as bad:
        h = hydrogen_ground(1.0)
        for alpha, crit in [((0, 0, 0), 1.5), ((0, 2, 0), 2.5)]:
            scan = weighted_sobolev_scan(h, alpha, [crit - 0.2, crit + 0.2], method="radial")
            if scan.eps[-1] > 1e-6:
                bad.append("eps schedule stops above 1e-6")
            for a, want in [(crit - 0.2, "CONVERGENT"), (crit + 0.2, "DIVERGENT")]:
                if scan.status(a) != want:
                    bad.append(f"alpha={alpha} a={a:.1f}: {scan.status(a)}")


def test_criterion_09_density():
    with criterion(9, "density pointwise ratios, L^p thresholds, far-field decay", 120) as bad:
        h = hydrogen_ground(1.0)
        rng = np.random.default_rng(9)
        t = np.logspace(-3, 0, 16)
        dirs = rng.normal(size=(16, 3))
        pts = t[:, None] * dirs / np.linalg.norm(dirs, axis=1, keepdims=True)
        for beta in [(1, 0, 0), (0, 2, 0), (1, 1, 0)]:
            out = verify_rho_pointwise(h, beta, 1.0, pts)
            if not out["passed"]:
                bad.append(f"(a) beta={beta}: {out['stats']['spread']:.2f}/{out['stats']['tau']:.2f}")
        for p in (1.0, 2.0):
            thr = (p + 3) / p
            out = rho_weighted_lp_scan(h, (0, 2, 0), p, [thr - 0.2, thr + 0.2])
            for w, want in [(thr - 0.2, "CONVERGENT"), (thr + 0.2, "DIVERGENT")]:
                if out["results"][float(w)]["status"] != want:
                    bad.append(f"(b) p={p} w={w:.1f}: {out['results'][float(w)]['status']}")
        for beta in [(1, 0, 0), (0, 1, 0)]:
            out = rho_far_field(h, beta, direction=(1.0, 1.0, 0.0), limit=-0.5)
            if not out["passed"]:
                bad.append(f"(c) beta={beta} slope {out['slope']:.3f}")


def test_criterion_10_apriori():
    with criterion(10, "a priori sup ratio and Coulomb moment", 180) as bad:
        for st in (hydrogen_ground(1.0), product_state(["1s", "1s"])):
            centers = random_centers(st.n_electrons, 100, seed=10)
            a = apriori_sup_ratio(st, centers, 0.5, 1.0, budget=5000, seed=101)
            b = apriori_sup_ratio(st, centers, 0.5, 1.0, budget=5000, seed=101, scale=3.7)
            drift = float(np.max(np.abs(a.ratios / b.ratios - 1)))
            if a.stats["on_sigma"] == 0:
                bad.append("no on-sigma centers")
            if not a.passed or drift > 1e-12:
                bad.append(f"N={st.n_electrons}: spread {a.stats['spread']:.2f} drift {drift:.1e}")
        sched = [np.array([s, 0.0, 0.0]) for s in np.logspace(-2, 0.3, 8)]
        out = rho_apriori_checks(product_state(["1s", "1s"]), sched, 0.25, 0.5, b=2.0, n_outer=1000, seed=102)
        if not out["checks"]["coulomb"]["passed"]:
            bad.append(f"Coulomb moment spread {out['checks']['coulomb']['spread']:.2f}")
        if not out["passed"]:
            bad.append(f"density a priori checks {out['checks']}")


def test_criterion_11_cross_engine():
    with criterion(11, "jets vs finite differences, density routes agree", 300) as bad:
        for name, field, _ in CORPUS:
            for a in FD_ALPHAS:
                est = fd_cross_check(field, X0, a, h0=0.05, check_singular=False)
                jet = partial_alpha(field, X0, a)
                if not est.agrees_with(jet):
                    bad.append(f"{name} {a}: jet {jet:.6e} fd {est.value:.6e}+-{est.error:.1e}")
        rng = np.random.default_rng(11)
        pair = product_state(["1s", "2s"])
        triple = product_state(["1s", "2s", ("1s", 1.5)])
        for i, beta in enumerate([(1, 0, 0), (0, 2, 0), (1, 1, 0)]):
            x1 = rng.normal(size=3)
            closed = density_partial(pair, x1, beta)
            mc = density_partial(pair, x1, beta, "mc", budget=5000, seed=110 + i)
            if not mc.agrees_with(closed):
                bad.append(f"mc beta={beta}: {mc.value:.6e}+-{mc.stderr:.1e} vs {closed.value:.6e}")
            for st in (pair, triple):
                direct = density_partial(st, x1, beta, "mc", budget=5000, seed=120 + i)
                part = density_partial(st, x1, beta, "partition", budget=5000, seed=130 + i)
                ref = density_partial(st, x1, beta)
                if not (part.agrees_with(direct) and part.agrees_with(ref)):
                    bad.append(f"partition N={st.n_electrons} beta={beta}: {part.value:.6e}+-{part.stderr:.1e} "
                               f"vs {direct.value:.6e}")


if __name__ == "__main__":
    failed = 0
    for name, fn in sorted(globals().items()):
        if name.startswith("test_criterion_"):
            try:
                fn()
            except AssertionError:
                failed += 1
    sys.exit(1 if failed else 0)
