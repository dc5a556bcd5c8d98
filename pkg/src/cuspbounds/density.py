"""One-electron density of a product state: values, derivatives, and the bounds it obeys.

rho(x) = sum_j int |psi(x at slot j, rest)|^2 d(rest), so int rho = N ||psi||^2.
Three routes to derivatives:

* ``closed``: the factorized form sum_j |phi_j|^2 prod_{k != j} ||phi_k||^2.
* ``mc``: Monte Carlo over the other electrons with a jet-valued integrand
  (differentiation under the integral). Sampling from the product of orbital
  densities makes the weight exactly constant, so the variance is ~0.
* ``partition``: insert the partition of unity, shift each cluster to move
  with x_1, and differentiate the shifted integrand. Per-sample terms now
  differ from the direct route, which makes this a real cross-check.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import stats
from scipy.special import gamma as gamma_fn

from .calculus.derivatives import partial_alpha
from .config import MultiIndex, PotentialSpec
from .errors import CenterAtNucleus, ConfigError, MethodUnavailable
from .oracles import OracleState, Orbital, exact_gradient
from .partition import CutoffPair, chi_tilde_field, generate_partition
from .sampling import BallSampler
from .verify import angular_rule, classify_scan, default_eps_schedule, log_shells, ratio_statistics, shell_edges

__all__ = [
    "DensityEstimate",
    "density",
    "density_partial",
    "rho_closed",
    "rho_partial_closed",
    "ball_integral",
    "verify_rho_pointwise",
    "rho_far_field",
    "rho_weighted_lp_scan",
    "rho_apriori_checks",
    "lipschitz_quotients",
]

METHODS = ("closed", "mc", "partition")


@dataclass
class DensityEstimate:
    x1: np.ndarray
    alpha: tuple[int, int, int]
    value: float
    stderr: float
    method: str
    n_samples: int = 0
    seed: object = None
    parts: dict = field(default_factory=dict)

    def agrees_with(self, other: "DensityEstimate | float", k: float = 3.0, floor: float = 1e-10) -> bool:
        """|difference| within k combined standard errors plus a relative rounding floor."""
        ov = other.value if isinstance(other, DensityEstimate) else float(other)
        os_ = other.stderr if isinstance(other, DensityEstimate) else 0.0
        sigma = math.hypot(self.stderr, os_)
        return abs(self.value - ov) <= k * sigma + floor * max(abs(self.value), abs(ov), 1e-300)


def _point(x1) -> np.ndarray:
    x = np.asarray(x1, dtype=float)
    if x.shape != (3,):
        raise ConfigError(f"x1 must be a point in R^3, got shape {x.shape}")
    return x


def _alpha3(alpha) -> tuple[int, int, int]:
    a = tuple(int(v) for v in alpha)
    if len(a) != 3 or min(a) < 0:
        raise ConfigError(f"density multi-index must be 3 non-negative ints, got {alpha!r}")
    return a


def _others_norm(state: OracleState, j: int) -> float:
    return math.prod(o.norm_sq for k, o in enumerate(state.orbitals) if k != j)


def _orbital_sq_partial(o: Orbital, x: np.ndarray, a: tuple[int, int, int]) -> np.ndarray:
    """d^a (phi^2) by Leibniz."""
    total = 0.0
    for b0 in range(a[0] + 1):
        for b1 in range(a[1] + 1):
            for b2 in range(a[2] + 1):
                b = (b0, b1, b2)
                c = math.comb(a[0], b0) * math.comb(a[1], b1) * math.comb(a[2], b2)
                rest = (a[0] - b0, a[1] - b1, a[2] - b2)
                total = total + c * o.partial(x, b) * o.partial(x, rest)
    return np.asarray(total, dtype=float)


def rho_closed(state: OracleState, x) -> np.ndarray | float:
    """rho at points of shape (3,) or (B, 3)."""
    return rho_partial_closed(state, x, (0, 0, 0))


def rho_partial_closed(state: OracleState, x, alpha) -> np.ndarray | float:
    a = _alpha3(alpha)
    xs = np.asarray(x, dtype=float)
    single = xs.ndim == 1
    xb = xs.reshape(-1, 3)
    out = np.zeros(xb.shape[0])
    for j, o in enumerate(state.orbitals):
        out = out + _others_norm(state, j) * _orbital_sq_partial(o, xb, a)
    return float(out[0]) if single else out


def _radial_rho(state: OracleState, s: np.ndarray) -> np.ndarray:
    out = np.zeros_like(s)
    for j, o in enumerate(state.orbitals):
        out = out + _others_norm(state, j) * o.profile(s) ** 2
    return out


def _reordered(state: OracleState, j: int) -> OracleState:
    """The same product with electron j moved to slot 1 (skips re-verification)."""
    orbs = (state.orbitals[j],) + tuple(o for k, o in enumerate(state.orbitals) if k != j)
    return OracleState(orbs, PotentialSpec.general([-o.Z for o in orbs], 0.0, len(orbs)))


def _rest_density(state: OracleState, xb: np.ndarray) -> np.ndarray:
    """Normalized product density of electrons 2..N at a batch (B, N, 3)."""
    out = np.ones(xb.shape[0])
    for k in range(1, state.n_electrons):
        out = out * state.orbitals[k].density(xb[:, k])
    return out


def _sample_rest(state: OracleState, x1: np.ndarray, m: int, rng: np.random.Generator) -> np.ndarray:
    x = state.sample(rng, m)
    x[:, 0] = x1
    return x


def _psi_sq(state: OracleState):
    def f(c):
        p = state.psi(c)
        return p * p
    return f


def _shifted_integrand(state: OracleState, index, cuts: CutoffPair):
    chi = chi_tilde_field(index, cuts)
    moved = index.shifted
    psi = state.psi

    def f(c):
        pos = [c[0]] + [
            [c[0][s] + c[k][s] for s in range(3)] if (k + 1) in moved else c[k]
            for k in range(1, len(c))
        ]
        p = psi(pos)
        return chi(c) * p * p
    return f


def _mc_slot1(state: OracleState, x1: np.ndarray, a: tuple[int, int, int], m: int, rng, route: str,
              cuts: CutoffPair) -> np.ndarray:
    """Per-sample estimates of d^a rho_1(x1), shape (m,)."""
    n = state.n_electrons
    full = MultiIndex(a + (0,) * (3 * n - 3))
    if n == 1:
        v = partial_alpha(_psi_sq(state), x1[None, None, :], full)
        return np.full(m, float(np.asarray(v).reshape(-1)[0]))
    x = _sample_rest(state, x1, m, rng)
    w = 1.0 / _rest_density(state, x)
    if route == "mc":
        vals = np.asarray(partial_alpha(_psi_sq(state), x, full), dtype=float)
        return vals * w
    total = np.zeros(m)
    for index in generate_partition(n):
        y = x.copy()
        for j in index.shifted:
            y[:, j - 1] -= x1
        total = total + np.asarray(partial_alpha(_shifted_integrand(state, index, cuts), y, full), dtype=float)
    return total * w


def density_partial(state: OracleState, x1, alpha, method: str = "closed", *, budget: int = 20_000, seed=0,
                    cuts: CutoffPair | None = None, normalize: bool = False) -> DensityEstimate:
    """d^alpha rho(x1) by the chosen route; Monte Carlo routes report a standard error.

    ``normalize`` divides by ||psi||^2, i.e. uses psi/||psi||.
    """
    est = _density_partial(state, x1, alpha, method, budget, seed, cuts)
    if normalize:
        ns = state.norm_sq
        est.value /= ns
        est.stderr /= ns
        est.parts = {k: (v / ns, e / ns) for k, (v, e) in est.parts.items()}
    return est


def _density_partial(state, x1, alpha, method, budget, seed, cuts) -> DensityEstimate:
    x = _point(x1)
    a = _alpha3(alpha)
    if method not in METHODS:
        raise MethodUnavailable(f"unknown method {method!r}; choose from {METHODS}")
    if not isinstance(state, OracleState):
        raise MethodUnavailable("only product oracle states have a closed form or a sampling density")
    if sum(a) > 0 and not np.any(x):
        raise CenterAtNucleus("rho is not differentiable at the nucleus")
    if method == "closed":
        return DensityEstimate(x, a, float(rho_partial_closed(state, x, a)), 0.0, "closed")
    if method == "partition" and not np.any(x):
        raise CenterAtNucleus("the partition of unity needs x1 != 0")
    cuts = cuts or CutoffPair()
    streams = np.random.SeedSequence(seed).spawn(state.n_electrons)
    value = 0.0
    var = 0.0
    parts = {}
    for j in range(state.n_electrons):
        rng = np.random.default_rng(streams[j])
        per = _mc_slot1(_reordered(state, j), x, a, budget, rng, method, cuts)
        mean = float(per.mean())
        se = float(per.std(ddof=1) / math.sqrt(per.size)) if per.size > 1 else 0.0
        parts[j + 1] = (mean, se)
        value += mean
        var += se * se
    return DensityEstimate(x, a, value, math.sqrt(var), method, budget, seed, parts)


def density(state: OracleState, x1, method: str = "closed", *, budget: int = 20_000, seed=0,
            normalize: bool = False) -> DensityEstimate:
    """rho(x1) in closed form or by Monte Carlo over the remaining electrons."""
    if method == "partition":
        raise MethodUnavailable("the partition route is a derivative cross-check; use 'closed' or 'mc'")
    return density_partial(state, x1, (0, 0, 0), method, budget=budget, seed=seed, normalize=normalize)


# --- ball integrals and ratio checks ------------------------------------------------


def ball_integral(state: OracleState, x1, R: float, n_nodes: int = 64) -> float:
    """int_{B(x1, R)} rho for a radial rho, by 1D quadrature over spheres cut by the ball."""
    if R <= 0:
        raise ConfigError(f"radius must be positive, got {R}")
    c = float(np.linalg.norm(_point(x1)))
    g, w = np.polynomial.legendre.leggauss(n_nodes)

    def gl(lo, hi, fn):
        if hi <= lo:
            return 0.0
        s = 0.5 * (hi - lo) * g + 0.5 * (hi + lo)
        return float(0.5 * (hi - lo) * np.sum(w * fn(s)))

    full = lambda s: 4 * np.pi * s**2 * _radial_rho(state, s)
    if c == 0.0:
        return gl(0.0, R, full)

    def cap(s):
        cos_max = np.clip((s**2 + c**2 - R**2) / (2 * s * c), -1.0, 1.0)
        return 2 * np.pi * (1 - cos_max) * s**2 * _radial_rho(state, s)

    inner = max(0.0, R - c)
    return gl(0.0, inner, full) + gl(abs(c - R), c + R, cap)


def verify_rho_pointwise(state: OracleState, alpha, R: float, x1_schedule, *, slack: float = 10.0,
                         tau_limit: float = 0.5) -> dict:
    """|d^a rho(x)| r(x)^{|a|-1} / int_{B(x,R)} rho across points approaching the nucleus."""
    a = _alpha3(alpha)
    if sum(a) < 1:
        raise ConfigError("the pointwise density bound needs |alpha| >= 1")
    rows = []
    for i, x in enumerate(x1_schedule):
        x = _point(x)
        rx = min(1.0, float(np.linalg.norm(x)))
        if rx == 0:
            raise CenterAtNucleus("schedule contains the nucleus")
        d = abs(float(rho_partial_closed(state, x, a)))
        mass = ball_integral(state, x, R)
        rows.append({"index": i, "x1": x.tolist(), "r": rx, "derivative": d, "mass": mass,
                     "ratio": d * rx ** (sum(a) - 1) / mass})
    st = ratio_statistics([r["r"] for r in rows], [r["ratio"] for r in rows], slack, tau_limit)
    st.update(alpha=list(a), R=R)
    return {"check": "density pointwise bound", "rows": rows, "stats": st, "passed": st["passed"]}


def rho_far_field(state: OracleState, alpha, direction=(1.0, 0.0, 0.0), t_values=None,
                  limit: float | None = None) -> dict:
    """Slope of log(|d^a rho| |x|^{|a|-1}) against |x| along a ray to infinity.

    |psi| <= C0 exp(-c0 |x|) gives rho <= C exp(-2 c0 |x_1|), so the default
    limit is -2 c0 with c0 the state's decay rate.
    """
    a = _alpha3(alpha)
    if limit is None:
        limit = -2.0 * state.decay_rate()
    d = np.asarray(direction, dtype=float)
    d = d / np.linalg.norm(d)
    t = np.linspace(4.0, 12.0, 9) if t_values is None else np.asarray(t_values, dtype=float)
    vals = np.abs(rho_partial_closed(state, t[:, None] * d, a)) * t ** (sum(a) - 1)
    fit = stats.linregress(t, np.log(vals))
    return {"check": "density far-field decay", "slope": float(fit.slope), "stderr": float(fit.stderr),
            "limit": limit, "passed": bool(fit.slope <= limit)}


def rho_weighted_lp_scan(state: OracleState, alpha, p: float, a_values, eps_schedule=None, *, D: float = 40.0,
                         n_radial: int = 24, rel_tol: float = 0.01) -> dict:
    """int_{eps<|x|<D} |r^{|a|-w} d^a rho|^p (or the sup for p = inf) over a shrinking eps.

    The integral is finite down to eps = 0 exactly when w < (p + 3)/p; for
    p = inf the weighted sup stays bounded exactly when w <= 1.
    """
    a = _alpha3(alpha)
    order = sum(a)
    if order < 1:
        raise ConfigError("weighted density scans need |alpha| >= 1")
    if not (p == math.inf or p >= 1):
        raise ConfigError(f"p must be in [1, inf], got {p}")
    eps = default_eps_schedule() if eps_schedule is None else np.asarray(eps_schedule, dtype=float)
    u, wu = angular_rule()
    edges = shell_edges(eps, D)
    shells = []
    for hi, lo, r, wr in log_shells(edges, n_radial):
        pts = (r[:, None, None] * u[None]).reshape(-1, 3)
        g = np.abs(rho_partial_closed(state, pts, a)).reshape(r.size, -1)
        shells.append((lo, np.minimum(1.0, r), wr, g))
    threshold = 1.0 if p == math.inf else (p + 3) / p
    out = {"alpha": list(a), "p": p, "threshold": threshold, "eps": eps.tolist(), "results": {}}
    for w in a_values:
        series = []
        total = 0.0
        for lo, lam, wr, g in shells:
            weighted = lam[:, None] ** (order - w) * g
            if p == math.inf:
                total = max(total, float(weighted.max()))
            else:
                total += float(np.sum(wr * ((weighted**p) @ wu)))
            if lo in eps:
                series.append(total)
        res = classify_scan(eps, series, rel_tol)
        res["values"] = series
        res["expected"] = "CONVERGENT" if (w <= threshold if p == math.inf else w < threshold) else "DIVERGENT"
        out["results"][float(w)] = res
    return out


def lipschitz_quotients(state: OracleState, scales=None, n_pairs: int = 200, seed=0) -> dict:
    """|rho(x) - rho(y)| / |x - y| for pairs at many scales, including pairs straddling the nucleus.

    Passes when no quotient exceeds the sampled sup of |grad rho| (taken over
    the same region plus points within 1e-8 of the nucleus) by more than 1%.
    """
    rng = np.random.default_rng(seed)
    scales = np.logspace(-6, 0, 7) if scales is None else np.asarray(scales, dtype=float)
    per_scale = []
    for h in scales:
        u = rng.standard_normal((n_pairs, 3))
        u /= np.linalg.norm(u, axis=1, keepdims=True)
        mid = rng.standard_normal((n_pairs, 3)) * h
        x, y = mid + 0.5 * h * u, mid - 0.5 * h * u
        q = np.abs(rho_closed(state, x) - rho_closed(state, y)) / h
        per_scale.append(float(q.max()))
    pts = np.concatenate([rng.standard_normal((4000, 3)) * s for s in (1e-8, 1e-3, 1.0)])
    grad = np.stack([rho_partial_closed(state, pts, e) for e in np.eye(3, dtype=int)], axis=1)
    gmax = float(np.linalg.norm(grad, axis=1).max())
    worst = max(per_scale)
    return {"check": "density Lipschitz", "max_quotient": worst, "per_scale": per_scale,
            "scales": scales.tolist(), "grad_sup": gmax, "passed": bool(np.isfinite(worst) and worst <= 1.01 * gmax)}


# --- a priori checks -------------------------------------------------------------------


def _ball_sup(fn, center: np.ndarray, r: float, m: int, rng) -> float:
    sampler = BallSampler(center.size, r, center.ravel(), rng)
    pts = sampler.draw(m).reshape((m,) + center.shape)
    return max(float(np.max(np.abs(fn(pts)))), float(np.abs(fn(center[None]))[0]))


def _coulomb_moment(state: OracleState, x1: np.ndarray, b: float, m: int, rng) -> tuple[float, float]:
    """int |x_2|^{-b} |psi(x1, rest)|^2 d(rest), x_2 drawn from a Gamma(3-b) radial law."""
    o2 = state.orbitals[1]
    rate = 2 * o2.decay
    shape = 3.0 - b
    x = state.sample(rng, m)
    x[:, 0] = x1
    rad = rng.gamma(shape, 1.0 / rate, m)
    v = rng.standard_normal((m, 3))
    v /= np.linalg.norm(v, axis=1, keepdims=True)
    x[:, 1] = rad[:, None] * v
    q2 = rate**shape * rad ** (shape - 1) * np.exp(-rate * rad) / gamma_fn(shape) / (4 * np.pi * rad**2)
    rest = np.ones(m)
    for k in range(2, state.n_electrons):
        rest = rest * state.orbitals[k].density(x[:, k])
    vals = rad ** (-b) * state.value(x) ** 2 / (q2 * rest)
    return float(vals.mean()), float(vals.std(ddof=1) / math.sqrt(m))


def rho_apriori_checks(state: OracleState, x1_schedule, r: float = 0.25, R: float = 0.5, b: float = 2.0, *,
                       n_outer: int = 2000, n_inner: int = 64, n_moment: int = 50_000, seed=0,
                       slack: float = 10.0) -> dict:
    """Left sides of the local density bounds against int_{B(x1,R)} rho over a schedule of x1.

    Checks: integrated squared sup of psi and of grad psi over 3N-balls of
    radius r, rho_1(x1), |grad rho_1(x1)|, and (for N >= 2) the |x_2|^{-b}
    weighted marginal. Each check passes when every ratio is finite and the
    max/median spread stays below ``slack``.
    """
    if not 0 < r < R:
        raise ConfigError(f"need 0 < r < R, got r={r}, R={R}")
    if not 0 <= b < 3:
        raise ConfigError(f"the Coulomb moment needs b in [0, 3), got {b}")
    n = state.n_electrons
    notices = []
    if n == 1:
        notices.append("Coulomb moment skipped: needs a second electron")
    names = ["sup_psi", "sup_grad", "rho", "grad_rho"] + (["coulomb"] if n >= 2 else [])
    rows = []
    streams = np.random.SeedSequence(seed).spawn(len(list(x1_schedule)))
    for i, (x1, ss) in enumerate(zip(x1_schedule, streams)):
        x1 = _point(x1)
        rng = np.random.default_rng(ss)
        mass = ball_integral(state, x1, R)
        if n == 1:
            xs = x1[None, None, :]
            w = np.ones(1)
        else:
            xs = _sample_rest(state, x1, n_outer, rng)
            w = 1.0 / _rest_density(state, xs)
        grad = lambda pts: np.linalg.norm(exact_gradient(state, pts).reshape(pts.shape[0], -1), axis=-1)
        sp = np.array([_ball_sup(state.value, xc, r, n_inner, rng) ** 2 for xc in xs])
        sg = np.array([_ball_sup(grad, xc, r, n_inner, rng) ** 2 for xc in xs])
        row = {"index": i, "x1": x1.tolist(), "mass": mass,
               "sup_psi": float(np.mean(sp * w)), "sup_grad": float(np.mean(sg * w))}
        rho1 = state.orbitals[0].value(x1[None])[0] ** 2 * _others_norm(state, 0)
        g1 = np.array([_orbital_sq_partial(state.orbitals[0], x1[None], e)[0] for e in np.eye(3, dtype=int)])
        row["rho"] = float(rho1)
        row["grad_rho"] = float(np.linalg.norm(g1) * _others_norm(state, 0))
        if n >= 2:
            row["coulomb"], row["coulomb_err"] = _coulomb_moment(state, x1, b, n_moment, rng)
        for k in names:
            row[k + "_ratio"] = row[k] / mass
        rows.append(row)
    checks = {}
    for k in names:
        vals = np.array([row[k + "_ratio"] for row in rows])
        finite = bool(np.all(np.isfinite(vals)) and np.all(vals > 0))
        spread = float(vals.max() / np.median(vals)) if finite else float("nan")
        checks[k] = {"spread": spread, "finite": finite, "passed": bool(finite and spread <= slack)}
    return {"check": "density a priori bounds", "rows": rows, "checks": checks, "notices": notices, "b": b,
            "r": r, "R": R, "passed": all(c["passed"] for c in checks.values())}
