"""Empirical checks of the derivative bounds on closed-form eigenfunctions.

Everything here is statistical: the bounds carry unspecified constants, so a
check passes when ratios of the two sides stay within a fixed band and show
no monotone trend as the regularized distance shrinks. Ball norms are Monte
Carlo volume averages (p < inf) or sample maxima (p = inf, a lower bound).
Each center gets its own seeded stream spawned from the run seed, so results
do not depend on evaluation order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import stats

from .calculus.derivatives import ScalarField, cluster_partial, evaluate, gradient, partial_alpha
from .config import ClusterSet, MultiIndex, as_batch, as_configuration
from .errors import (
    BudgetExhausted,
    CenterOnSingularSet,
    ConfigError,
    DegenerateRay,
    InvalidAlpha,
)
from .geometry import ByAlpha, Full, ParallelCluster, dist_to_selected, dist_to_sigma, lambda_reg
from .oracles import OracleState, exact_cluster_partial, exact_gradient, exact_partial
from .sampling import BallSampler, unit_ball_volume

__all__ = [
    "BallNormEstimate",
    "RatioTable",
    "Ray",
    "ScalingReport",
    "SobolevScan",
    "ball_lp_norm",
    "ratio_statistics",
    "verify_main_theorem",
    "verify_pointwise",
    "verify_parallel",
    "scaling_exponent",
    "apriori_sup_ratio",
    "weighted_sobolev_scan",
    "classify_scan",
    "decay_slope",
    "approach_centers",
    "random_centers",
    "default_radii",
    "default_eps_schedule",
    "angular_rule",
    "shell_edges",
    "log_shells",
]

INF = math.inf


@dataclass(frozen=True)
class BallNormEstimate:
    center: np.ndarray
    radius: float
    p: float
    value: float
    error: float
    n_samples: int
    seed: object = None

    @property
    def lower_bound(self) -> bool:
        """p = inf values are sample maxima and never exceed the true sup."""
        return self.p == INF


@dataclass
class RatioTable:
    check: str
    rows: list[dict]
    stats: dict
    passed: bool

    @property
    def ratios(self) -> np.ndarray:
        return np.array([r["ratio"] for r in self.rows])


@dataclass(frozen=True)
class Ray:
    """x(t) = base + t * direction for t > 0."""

    base: np.ndarray
    direction: np.ndarray

    def __post_init__(self) -> None:
        b = as_configuration(self.base)
        d = np.asarray(self.direction, dtype=float).reshape(b.shape)
        if not np.any(d):
            raise DegenerateRay("ray direction is zero")
        object.__setattr__(self, "base", b)
        object.__setattr__(self, "direction", d)

    @classmethod
    def axis(cls, n_electrons: int = 1, electron: int = 1, axis: int = 0, base=None) -> "Ray":
        d = np.zeros((n_electrons, 3))
        d[electron - 1, axis] = 1.0
        b = np.zeros((n_electrons, 3)) if base is None else base
        return cls(b, d)

    def at(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        return self.base + t[..., None, None] * self.direction

    def describe(self) -> str:
        return f"base={self.base.tolist()} direction={self.direction.tolist()}"


@dataclass
class ScalingReport:
    alpha: MultiIndex
    selector: object
    ray: str
    radii: np.ndarray
    distances: np.ndarray
    magnitudes: np.ndarray
    slope: float
    stderr: float
    target: float
    mode: str
    tol: float
    passed: bool


@dataclass
class SobolevScan:
    alpha: MultiIndex
    eps: np.ndarray
    results: dict = field(default_factory=dict)

    def status(self, a: float) -> str:
        return self.results[float(a)]["status"]


# --- derivative sources -----------------------------------------------------


class _Source:
    """Values and derivatives of an oracle state, from closed forms or jets."""

    def __init__(self, state: OracleState, engine: str = "closed"):
        if engine not in ("closed", "jet"):
            raise ConfigError(f"engine must be 'closed' or 'jet', got {engine!r}")
        self.state = state
        self.engine = engine

    def value(self, xb):
        return self.state.value(xb)

    def partial(self, xb, alpha):
        if self.engine == "closed":
            return exact_partial(self.state, xb, alpha)
        return partial_alpha(self.state.psi, xb, alpha)

    def grad_norm(self, xb):
        g = exact_gradient(self.state, xb) if self.engine == "closed" else gradient(self.state.psi, xb)
        return np.linalg.norm(g.reshape(g.shape[0], -1), axis=-1)

    def cluster(self, xb, q, a3):
        if self.engine == "closed":
            return exact_cluster_partial(self.state, xb, q, a3)
        return cluster_partial(self.state.psi, xb, q, a3)


# --- ball norms ---------------------------------------------------------------


def _ball_norms(fns: Sequence[Callable], center: np.ndarray, radius: float, p: float, budget: int,
                seed, reject: Callable | None = None) -> list[BallNormEstimate]:
    """L^p norms of several batch functions over one shared set of ball samples."""
    if radius <= 0:
        raise ConfigError(f"ball radius must be positive, got {radius}")
    if not (p == INF or p > 0):
        raise ConfigError(f"p must be positive or inf, got {p}")
    c = np.asarray(center, dtype=float)
    shape = c.shape
    sampler = BallSampler(c.size, radius, c.ravel(), seed)
    kept = [[] for _ in fns]
    n_kept = 0
    drawn = 0
    while n_kept < budget:
        if drawn >= 4 * budget:
            raise BudgetExhausted(f"only {n_kept} of {budget} usable samples after {drawn} draws")
        m = budget - n_kept
        pts = sampler.draw(m).reshape((m,) + shape)
        drawn += m
        vals = [np.abs(np.asarray(f(pts), dtype=float)).reshape(m) for f in fns]
        ok = np.all([np.isfinite(v) for v in vals], axis=0)
        if reject is not None:
            ok &= ~np.asarray(reject(pts), dtype=bool)
        for store, v in zip(kept, vals):
            store.append(v[ok])
        n_kept += int(ok.sum())
    vol = unit_ball_volume(c.size) * radius ** c.size
    out = []
    for store in kept:
        v = np.concatenate(store)[:budget]
        if p == INF:
            value, err = float(v.max()), float("nan")
        else:
            w = v**p
            mean = float(w.mean())
            value = (vol * mean) ** (1.0 / p)
            se = float(w.std(ddof=1)) / math.sqrt(v.size) if v.size > 1 else 0.0
            err = value * se / (p * mean) if mean > 0 else 0.0
        out.append(BallNormEstimate(c.copy(), float(radius), float(p), value, err, int(v.size), seed))
    return out


def ball_lp_norm(f: ScalarField | Callable, center, radius: float, p: float = 2.0, budget: int = 100_000,
                 seed=None, *, batch: bool = False, reject: Callable | None = None) -> BallNormEstimate:
    """||f||_{L^p(B(center, radius))} by uniform sampling.

    ``f`` is a scalar field over electron coordinates, or with ``batch=True``
    a function of a (n, N, 3) sample array. Samples where ``f`` is not finite
    or ``reject`` returns True are dropped and redrawn.
    """
    c = as_configuration(center)
    fn = f if batch else (lambda pts: evaluate(f, pts))
    return _ball_norms([fn], c, radius, p, int(budget), seed, reject)[0]


# --- ratio tables ----------------------------------------------------------------


def ratio_statistics(lams, ratios, slack: float = 10.0, tau_limit: float = 0.5, trend=None) -> dict:
    """Spread and trend summary; ``trend`` replaces lambda as the Kendall variable."""
    r = np.asarray(ratios, dtype=float)
    t = np.asarray(lams if trend is None else trend, dtype=float)
    finite = bool(np.all(np.isfinite(r)) and np.all(r > 0))
    out = {"n": int(r.size), "finite": finite, "slack": slack, "tau_limit": tau_limit}
    if not finite or r.size < 3:
        out.update(spread=float("nan"), tau=float("nan"), tau_pvalue=float("nan"), log_slope=float("nan"),
                   passed=False)
        return out
    spread = float(r.max() / np.median(r))
    tau, pval = stats.kendalltau(np.log(t), np.log(r))
    slope = float(np.polyfit(np.log(t), np.log(r), 1)[0]) if np.ptp(np.log(t)) > 0 else float("nan")
    ok = spread <= slack and np.isfinite(tau) and abs(tau) < tau_limit
    out.update(spread=spread, tau=float(tau), tau_pvalue=float(pval), log_slope=slope, passed=bool(ok))
    return out


def _seeds(seed, n: int) -> list[np.random.SeedSequence]:
    return np.random.SeedSequence(seed).spawn(n)


def _lambda(x, selector, spec) -> float:
    d = dist_to_selected(x, selector, spec)
    if d <= 0:
        raise CenterOnSingularSet(f"center {np.asarray(x).tolist()} lies on the selected coalescence set")
    return lambda_reg(d)


def verify_main_theorem(state: OracleState, alpha, p: float, r: float, R: float, centers, *,
                        variant: str = "alpha", budget: int = 100_000, seed=0, slack: float = 10.0,
                        tau_limit: float = 0.5, engine: str = "closed", trend=None) -> RatioTable:
    """Ball-norm bound: ||d^a psi||_{B(x, r lam)} vs lam^{1-|a|}(||psi|| + ||grad psi||)_{B(x, R lam)}.

    ``variant='alpha'`` uses the distance to coalescences touching supp(alpha),
    ``'full'`` the distance to the whole coalescence set.
    """
    if not 0 < r < R < 1:
        raise ConfigError(f"need 0 < r < R < 1, got r={r}, R={R}")
    n = state.n_electrons
    a = MultiIndex.coerce(alpha, n)
    if variant == "alpha":
        selector = ByAlpha(a)
    elif variant == "full":
        selector = Full()
    else:
        raise ConfigError(f"variant must be 'alpha' or 'full', got {variant!r}")
    src = _Source(state, engine)
    cs = [as_configuration(x, n) for x in centers]
    rows = []
    for i, (x, ss) in enumerate(zip(cs, _seeds(seed, len(cs)))):
        lam = _lambda(x, selector, state.spec)
        lhs_seed, rhs_seed = ss.spawn(2)
        (lhs,) = _ball_norms([lambda pts: src.partial(pts, a)], x, r * lam, p, budget, lhs_seed)
        nv, ng = _ball_norms([src.value, src.grad_norm], x, R * lam, p, budget, rhs_seed)
        rhs = lam ** (1 - a.order) * (nv.value + ng.value)
        rows.append({"index": i, "center": x.tolist(), "lambda": lam, "lhs": lhs.value, "lhs_err": lhs.error,
                     "psi_norm": nv.value, "grad_norm": ng.value, "rhs": rhs, "ratio": lhs.value / rhs})
    lams = [row["lambda"] for row in rows]
    st = ratio_statistics(lams, [row["ratio"] for row in rows], slack, tau_limit, trend)
    st.update(alpha=str(a), p=p, r=r, R=R, variant=variant, budget=budget)
    return RatioTable("ball-norm derivative bound", rows, st, st["passed"])


def verify_pointwise(state: OracleState, alpha, R: float, centers, *, budget: int = 20_000, seed=0,
                     slack: float = 10.0, tau_limit: float = 0.5, engine: str = "closed",
                     trend=None) -> RatioTable:
    """|d^a psi(x)| lam^{|a|-1} / ||psi||_{L^inf(B(x, R))} across centers."""
    n = state.n_electrons
    a = MultiIndex.coerce(alpha, n)
    if a.order < 1:
        raise InvalidAlpha("the pointwise bound needs |alpha| >= 1")
    selector = ByAlpha(a)
    src = _Source(state, engine)
    cs = [as_configuration(x, n) for x in centers]
    rows = []
    for i, (x, ss) in enumerate(zip(cs, _seeds(seed, len(cs)))):
        lam = _lambda(x, selector, state.spec)
        lhs = abs(float(np.asarray(src.partial(x[None], a)).reshape(-1)[0]))
        (sup,) = _ball_norms([src.value], x, R, INF, budget, ss)
        sup_v = max(sup.value, abs(float(state.value(x))))
        ratio = lhs * lam ** (a.order - 1) / sup_v
        rows.append({"index": i, "center": x.tolist(), "lambda": lam, "lhs": lhs, "sup": sup_v, "ratio": ratio})
    st = ratio_statistics([row["lambda"] for row in rows], [row["ratio"] for row in rows], slack, tau_limit, trend)
    st.update(alpha=str(a), R=R)
    return RatioTable("pointwise derivative bound", rows, st, st["passed"])


def verify_parallel(state: OracleState, cluster, alpha3: Sequence[int], p: float, r: float, R: float, centers, *,
                    budget: int = 100_000, seed=0, slack: float = 10.0, tau_limit: float = 0.5,
                    engine: str = "closed", trend=None) -> RatioTable:
    """Cluster-derivative ball bound with the distance to coalescences not preserved by moving Q."""
    if not 0 < r < R < 1:
        raise ConfigError(f"need 0 < r < R < 1, got r={r}, R={R}")
    n = state.n_electrons
    q = cluster if isinstance(cluster, ClusterSet) else ClusterSet(cluster, n)
    a3 = tuple(int(v) for v in alpha3)
    if len(a3) != 3 or min(a3) < 0:
        raise ConfigError(f"cluster multi-index must be 3 non-negative ints, got {alpha3!r}")
    order = sum(a3)
    selector = ParallelCluster(q)
    src = _Source(state, engine)
    cs = [as_configuration(x, n) for x in centers]
    rows = []
    for i, (x, ss) in enumerate(zip(cs, _seeds(seed, len(cs)))):
        lam = _lambda(x, selector, state.spec)
        lhs_seed, rhs_seed = ss.spawn(2)
        (lhs,) = _ball_norms([lambda pts: src.cluster(pts, q, a3)], x, r * lam, p, budget, lhs_seed)
        nv, ng = _ball_norms([src.value, src.grad_norm], x, R * lam, p, budget, rhs_seed)
        rhs = lam ** (1 - order) * (nv.value + ng.value)
        rows.append({"index": i, "center": x.tolist(), "lambda": lam, "lhs": lhs.value, "lhs_err": lhs.error,
                     "psi_norm": nv.value, "grad_norm": ng.value, "rhs": rhs, "ratio": lhs.value / rhs})
    st = ratio_statistics([row["lambda"] for row in rows], [row["ratio"] for row in rows], slack, tau_limit, trend)
    st.update(cluster=sorted(q.members), alpha=list(a3), p=p, r=r, R=R, budget=budget)
    return RatioTable("cluster derivative bound", rows, st, st["passed"])


def apriori_sup_ratio(state: OracleState, centers, r: float, R: float, *, budget: int = 20_000, seed=0,
                      scale: float = 1.0, slack: float = 10.0, engine: str = "closed") -> RatioTable:
    """(sup_{B(x,r)} |psi| + sup_{B(x,r)} |grad psi|) / ||psi||_{L^2(B(x,R))}.

    The estimate is global, so centers on the coalescence set are allowed.
    ``scale`` multiplies psi; the ratio is homogeneous of degree zero.
    """
    if not 0 < r < R:
        raise ConfigError(f"need 0 < r < R, got r={r}, R={R}")
    n = state.n_electrons
    src = _Source(state, engine)
    val = lambda pts: scale * src.value(pts)
    grad = lambda pts: abs(scale) * src.grad_norm(pts)
    cs = [as_configuration(x, n) for x in centers]
    rows = []
    for i, (x, ss) in enumerate(zip(cs, _seeds(seed, len(cs)))):
        s_in, s_out = ss.spawn(2)
        sv, sg = _ball_norms([val, grad], x, r, INF, budget, s_in)
        (l2,) = _ball_norms([val], x, R, 2.0, budget, s_out)
        ratio = (sv.value + sg.value) / l2.value
        rows.append({"index": i, "center": x.tolist(), "on_sigma": bool(dist_to_sigma(x, state.spec) == 0),
                     "sup_psi": sv.value, "sup_grad": sg.value, "l2": l2.value, "ratio": ratio})
    ratios = np.array([row["ratio"] for row in rows])
    finite = bool(np.all(np.isfinite(ratios)) and np.all(ratios > 0))
    spread = float(ratios.max() / np.median(ratios)) if finite else float("nan")
    st = {"n": len(rows), "finite": finite, "spread": spread, "slack": slack, "r": r, "R": R, "scale": scale,
          "on_sigma": int(sum(row["on_sigma"] for row in rows))}
    st["passed"] = bool(finite and spread <= slack)
    return RatioTable("a priori sup bound", rows, st, st["passed"])


# --- centers ------------------------------------------------------------------


def _unit(rng: np.random.Generator) -> np.ndarray:
    v = rng.standard_normal(3)
    return v / np.linalg.norm(v)


def approach_centers(n_electrons: int, t_values, *, kind: str = "nucleus", seed=0, far: float = 3.0,
                     moving: int = 1, partner: int = 2) -> list[np.ndarray]:
    """Configurations at distance ~t from one coalescence, in random directions.

    ``kind='nucleus'`` puts electron ``moving`` at t*u; ``kind='pair'`` puts
    electrons ``moving`` and ``partner`` at c +- (t/2) u around a far point c.
    Remaining electrons sit on well separated shells of radius >= ``far``.
    """
    rng = np.random.default_rng(seed)
    out = []
    for t in np.asarray(t_values, dtype=float):
        x = np.zeros((n_electrons, 3))
        shell = 0
        for k in range(n_electrons):
            x[k] = far * (1 + shell) * _unit(rng)
            shell += 1
        if kind == "nucleus":
            x[moving - 1] = t * _unit(rng)
        elif kind == "pair":
            if n_electrons < 2 or moving == partner:
                raise ConfigError("pair approach needs two distinct electrons")
            c = x[moving - 1].copy()
            u = _unit(rng)
            x[moving - 1] = c + 0.5 * t * u
            x[partner - 1] = c - 0.5 * t * u
        else:
            raise ConfigError(f"kind must be 'nucleus' or 'pair', got {kind!r}")
        out.append(x)
    return out


def random_centers(n_electrons: int, count: int = 100, *, seed=0, scale: float = 1.5,
                   on_sigma_fraction: float = 0.25, near_fraction: float = 0.25) -> list[np.ndarray]:
    """Gaussian centers, a share placed exactly on and a share placed near the coalescence set."""
    rng = np.random.default_rng(seed)
    out = []
    n_on = int(round(count * on_sigma_fraction))
    n_near = int(round(count * near_fraction))
    for i in range(count):
        x = rng.normal(scale=scale, size=(n_electrons, 3))
        if i < n_on + n_near:
            shift = 0.0 if i < n_on else 10 ** rng.uniform(-3, -1)
            j = int(rng.integers(n_electrons))
            if n_electrons > 1 and rng.random() < 0.5:
                k = int((j + 1 + rng.integers(n_electrons - 1)) % n_electrons)
                x[j] = x[k] + shift * _unit(rng)
            else:
                x[j] = shift * _unit(rng)
        out.append(x)
    return out


# --- scaling exponents ---------------------------------------------------------


def default_radii(start: float = 0.1, stop: float = 1e-4) -> np.ndarray:
    """Geometric radii with factor 1/2 from ``start`` down past ``stop``."""
    k = int(math.ceil(math.log2(start / stop)))
    return start * 0.5 ** np.arange(k + 1)


def _strata(x: np.ndarray, selector, spec) -> list[float]:
    """Distances from one configuration to each individual coalescence plane in the selection."""
    n = x.shape[0]
    if isinstance(selector, Full):
        members = list(range(1, n + 1))
    elif isinstance(selector, ByAlpha):
        members = sorted(selector.alpha.support)
    else:
        raise ConfigError(f"unsupported selector {selector!r} for a scaling scan")
    centers = spec.centers if spec is not None else np.zeros((1, 3))
    out = []
    for j in members:
        out.extend(np.linalg.norm(x[j - 1] - centers, axis=-1).tolist())
    for j in members:
        for k in range(1, n + 1):
            if k != j and (k not in members or k > j):
                out.append(float(np.linalg.norm(x[j - 1] - x[k - 1])) / math.sqrt(2))
    return out


def scaling_exponent(state: OracleState, alpha, ray: Ray | None = None, radii=None, *, k: int = 5,
                     mode: str = "sharp", tol: float = 0.05, selector=None,
                     engine: str = "closed") -> ScalingReport:
    """Slope of log|d^a psi| against log d_a along a ray into one coalescence plane.

    ``mode='sharp'`` asks for slope = 1 - |a| within ``tol``; ``'bound'`` only
    for slope >= 1 - |a| - tol.
    """
    n = state.n_electrons
    a = MultiIndex.coerce(alpha, n)
    if a.order < 1:
        raise InvalidAlpha("scaling scans need |alpha| >= 1")
    if mode not in ("sharp", "bound"):
        raise ConfigError(f"mode must be 'sharp' or 'bound', got {mode!r}")
    if k < 4:
        raise ConfigError("fits need at least 4 points")
    ray = ray or Ray.axis(n)
    sel = selector or ByAlpha(a)
    t = default_radii() if radii is None else np.asarray(radii, dtype=float)
    if t.size < k or np.any(np.diff(t) >= 0) or np.any(t <= 0):
        raise ConfigError("radii must be positive, strictly decreasing, and at least k long")
    hit = [s for s in _strata(ray.base, sel, state.spec) if s < 1e-14]
    if len(hit) != 1:
        raise DegenerateRay(f"ray meets {len(hit)} coalescence planes at t=0; exactly one is required")
    pts = ray.at(t)
    d = np.asarray(dist_to_selected(pts, sel, state.spec), dtype=float)
    src = _Source(state, engine)
    mag = np.abs(np.asarray(src.partial(pts, a), dtype=float))
    if np.any(mag == 0) or np.any(d <= 0):
        raise DegenerateRay("derivative vanishes identically along the ray; pick another multi-index")
    fit = stats.linregress(np.log(d[-k:]), np.log(mag[-k:]))
    target = 1.0 - a.order
    slope = float(fit.slope)
    ok = abs(slope - target) <= tol if mode == "sharp" else slope >= target - tol
    return ScalingReport(a, sel, ray.describe(), t, d, mag, slope, float(fit.stderr), target, mode, tol, bool(ok))


def decay_slope(state: OracleState, alpha, direction=None, t_values=None, engine: str = "closed") -> dict:
    """Fitted d log|d^a psi| / d|x| along a ray to infinity, against -c0/2."""
    n = state.n_electrons
    a = MultiIndex.coerce(alpha, n)
    d = np.ones((n, 3)) if direction is None else np.asarray(direction, dtype=float).reshape(n, 3)
    d = d / np.linalg.norm(d)
    t = np.linspace(4.0, 16.0, 13) if t_values is None else np.asarray(t_values, dtype=float)
    pts = t[:, None, None] * d
    mag = np.abs(np.asarray(_Source(state, engine).partial(pts, a), dtype=float))
    fit = stats.linregress(t, np.log(mag))
    c0 = state.decay_rate()
    return {"slope": float(fit.slope), "stderr": float(fit.stderr), "limit": -c0 / 2,
            "passed": bool(fit.slope <= -c0 / 2)}


# --- weighted Sobolev scans ----------------------------------------------------


def default_eps_schedule(hi: float = 1e-1, lo: float = 1e-6, per_decade: int = 4) -> np.ndarray:
    k0 = round(-math.log10(hi) * per_decade)
    k1 = round(-math.log10(lo) * per_decade)
    return 10.0 ** (-np.arange(k0, k1 + 1) / per_decade)


def classify_scan(eps, values, rel_tol: float = 0.01) -> dict:
    """CONVERGENT / DIVERGENT / INCONCLUSIVE from the tail of I(eps_k).

    q compares the last four increments with the four before them (taken to
    the 1/4 power, so it is a per-step growth factor): q > 1 is geometric
    growth. Convergence also needs the last relative increment below rel_tol.
    """
    v = np.asarray(values, dtype=float)
    inc = np.abs(np.diff(v))
    m = min(4, inc.size // 2)
    if m < 1:
        return {"status": "INCONCLUSIVE", "q": float("nan"), "rel_increment": float("nan")}
    last, prev = inc[-m:].sum(), inc[-2 * m:-m].sum()
    if last == 0:
        q = 0.0
    else:
        q = (last / prev) ** (1.0 / m) if prev > 0 else float("nan")
    rel = float(inc[-1] / abs(v[-1])) if v[-1] != 0 else float("nan")
    if np.isfinite(q) and q > 1:
        status = "DIVERGENT"
    elif np.isfinite(q) and rel < rel_tol:
        status = "CONVERGENT"
    else:
        status = "INCONCLUSIVE"
    return {"status": status, "q": float(q), "rel_increment": rel}


def angular_rule(n_theta: int = 24, n_phi: int = 48) -> tuple[np.ndarray, np.ndarray]:
    """Product rule on the sphere: Gauss-Legendre in cos(theta), trapezoid in phi."""
    ct, wt = np.polynomial.legendre.leggauss(n_theta)
    phi = 2 * np.pi * np.arange(n_phi) / n_phi
    st = np.sqrt(1 - ct**2)
    u = np.stack([np.outer(st, np.cos(phi)), np.outer(st, np.sin(phi)), np.outer(ct, np.ones(n_phi))], axis=-1)
    w = np.outer(wt, np.full(n_phi, 2 * np.pi / n_phi))
    return u.reshape(-1, 3), w.reshape(-1)


def shell_edges(eps, D: float) -> list[float]:
    """Decreasing shell boundaries: D, a few far breaks, 1 (where min(1, r) kinks) and the eps schedule."""
    edges = sorted(set([D, 1.0] + [float(e) for e in eps] + [D / 8, D / 4, D / 2]), reverse=True)
    return [e for e in edges if e <= D]


def log_shells(edges: Sequence[float], n_radial: int = 24):
    """Yield (hi, lo, r, w) with Gauss-Legendre nodes in log r; w includes the r^2 dr volume factor."""
    s, ws = np.polynomial.legendre.leggauss(n_radial)
    for hi, lo in zip(edges[:-1], edges[1:]):
        la, lb = math.log(lo), math.log(hi)
        r = np.exp(0.5 * (lb - la) * s + 0.5 * (lb + la))
        yield hi, lo, r, 0.5 * (lb - la) * ws * r**3


def _radial_scan(src: _Source, a: MultiIndex, a_values, eps: np.ndarray, D: float, n_radial: int = 24) -> dict:
    """Hydrogen-type scans: shell integrals in log r times a spherical product rule."""
    u, wu = angular_rule()
    edges = shell_edges(eps, D)
    shell = {}
    for hi, lo, r, wr in log_shells(edges, n_radial):
        pts = (r[:, None, None] * u[None]).reshape(-1, 1, 3)
        g = np.asarray(src.partial(pts, a), dtype=float).reshape(r.size, -1) ** 2
        ang = g @ wu
        lam = np.minimum(1.0, r)
        shell[(hi, lo)] = (lam, wr * ang)
    out = {}
    for av in a_values:
        pw = 2.0 * (a.order - av)
        total = 0.0
        series = []
        for hi, lo in zip(edges[:-1], edges[1:]):
            lam, contrib = shell[(hi, lo)]
            total += float(np.sum(lam**pw * contrib))
            if lo in eps:
                series.append(total)
        out[float(av)] = (np.array(series), np.zeros(len(series)))
    return out


def _mc_scan(state: OracleState, src: _Source, a: MultiIndex, selector, a_values, eps: np.ndarray, D: float,
             budget: int, seed) -> dict:
    """Multi-channel importance sampling over R^{3N} with log-radial channels at each coalescence.

    Channel 0 draws from |psi|^2. Each further channel redraws one electron k
    log-uniformly in distance around the nucleus or around another electron.
    Weights use the mixture density of all channels.
    """
    n = state.n_electrons
    rng = np.random.default_rng(seed)
    members = sorted(selector.alpha.support) if isinstance(selector, ByAlpha) else list(range(1, n + 1))
    channels = [None]
    for k in members:
        channels.append((k, 0))
        for j in range(1, n + 1):
            if j != k:
                channels.append((k, j))
    m = max(1, budget // len(channels))
    lo = float(np.min(eps))
    L = math.log(D / lo)
    xs = []
    for ch in channels:
        x = state.sample(rng, m)
        if ch is not None:
            k, j = ch
            rho = np.exp(math.log(lo) + L * rng.random(m))
            v = rng.standard_normal((m, 3))
            v /= np.linalg.norm(v, axis=1, keepdims=True)
            base = 0.0 if j == 0 else x[:, j - 1]
            x[:, k - 1] = base + rho[:, None] * v
        xs.append(x)
    x = np.concatenate(xs)
    dens = np.stack([o.density(x[:, i]) for i, o in enumerate(state.orbitals)], axis=1)
    mix = np.prod(dens, axis=1)
    for ch in channels[1:]:
        k, j = ch
        base = 0.0 if j == 0 else x[:, j - 1]
        rho = np.linalg.norm(x[:, k - 1] - base, axis=-1)
        g = np.where((rho >= lo) & (rho <= D), 1.0 / (4 * np.pi * rho**3 * L), 0.0)
        rest = np.prod(np.delete(dens, k - 1, axis=1), axis=1)
        mix = mix + rest * g
    mix /= len(channels)
    d = np.asarray(dist_to_selected(x, selector, state.spec), dtype=float)
    f2 = np.asarray(src.partial(x, a), dtype=float) ** 2
    lam = np.minimum(1.0, d)
    ntot = x.shape[0]
    inside = d < D
    out = {}
    for av in a_values:
        w = np.where(inside, lam ** (2.0 * (a.order - av)) * f2 / mix, 0.0)
        series, errs = [], []
        for e in eps:
            c = np.where(d > e, w, 0.0)
            series.append(float(c.sum() / ntot))
            errs.append(float(c.std(ddof=1) / math.sqrt(ntot)))
        out[float(av)] = (np.array(series), np.array(errs))
    return out


def weighted_sobolev_scan(state: OracleState, alpha, a_values, selector=None, eps_schedule=None, *,
                          D: float = 40.0, method: str = "auto", budget: int = 200_000, seed=0,
                          rel_tol: float = 0.01, engine: str = "closed") -> SobolevScan:
    """I(eps) = int_{eps < d < D} lam^{2(|a| - a_w)} |d^a psi|^2 over a decreasing eps schedule.

    ``method='radial'`` is deterministic quadrature for one electron about a
    nucleus at the origin; ``'mc'`` is importance-sampled Monte Carlo.
    """
    n = state.n_electrons
    a = MultiIndex.coerce(alpha, n)
    sel = selector if selector is not None else (ByAlpha(a) if a.order > 0 else Full())
    eps = default_eps_schedule() if eps_schedule is None else np.asarray(eps_schedule, dtype=float)
    if eps.size < 3 or np.any(np.diff(eps) >= 0) or eps[0] >= D:
        raise ConfigError("eps schedule must be strictly decreasing, below D, with at least 3 entries")
    if method == "auto":
        method = "radial" if n == 1 else "mc"
    src = _Source(state, engine)
    if method == "radial":
        if n != 1 or np.any(state.spec.centers):
            raise ConfigError("radial quadrature needs one electron and a nucleus at the origin")
        raw = _radial_scan(src, a, a_values, eps, D)
    elif method == "mc":
        raw = _mc_scan(state, src, a, sel, a_values, eps, D, int(budget), seed)
    else:
        raise ConfigError(f"method must be 'auto', 'radial' or 'mc', got {method!r}")
    scan = SobolevScan(a, eps)
    for av, (series, errs) in raw.items():
        res = classify_scan(eps, series, rel_tol)
        res.update(values=series.tolist(), errors=errs.tolist(), method=method)
        scan.results[av] = res
    return scan
