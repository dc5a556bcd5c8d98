"""A scale-adapted partition of unity around electron 1.

Every other electron j is classified by the ratio t_j = |x_j|/|x_1| into
dyadic-like shells 4^{-s}. An index I = (J, P_J, Q_{J-1}, ..., Q_0) assigns
each j in {2..N} either to the inner group P_J (t_j below ~4^{-J}) or to a
shell Q_s, and chi_I is the matching product of cutoff factors. The index
list is produced by the refinement recursion that proves the sum equals 1:
split, keep terminal terms, and refine the mixed ones.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterator, Sequence

import numpy as np

from . import _kernels
from .calculus import jet as J
from .calculus.derivatives import ScalarField, coords_of, partial_all
from .config import MultiIndex, as_batch
from .errors import CenterElectronAtOrigin, ConfigError, EmptySupportSample, UnsupportedN
from .sampling import SupEstimate, empirical_sup

__all__ = [
    "partition_sum_error",
    "PartitionIndex",
    "CutoffPair",
    "generate_partition",
    "chi_I",
    "chi_I_tilde",
    "chi_field",
    "chi_tilde_field",
    "sample_support",
    "verify_support_control",
    "verify_chi_tilde_derivative_bounds",
    "fubini_count",
]


@dataclass(frozen=True)
class PartitionIndex:
    """(J, P_J, Q_{J-1}, ..., Q_0); ``shells[s]`` holds Q_s."""

    J: int
    P: frozenset[int]
    shells: tuple[frozenset[int], ...]
    n_electrons: int

    def __post_init__(self) -> None:
        others = set(range(2, self.n_electrons + 1))
        if self.J < 0 or len(self.shells) != self.J:
            raise ConfigError(f"index needs exactly J={self.J} shells, got {len(self.shells)}")
        groups = [self.P, *self.shells]
        seen: set[int] = set()
        for g in groups:
            if seen & g:
                raise ConfigError(f"index groups are not disjoint: {self}")
            seen |= g
        if seen != others:
            raise ConfigError(f"index groups must cover {{2..{self.n_electrons}}}: {self}")

    @property
    def shifted(self) -> frozenset[int]:
        """Electrons whose position is replaced by x_1 + x_j in the shifted cutoff."""
        return frozenset().union(*self.shells) if self.shells else frozenset()

    def __str__(self) -> str:
        fmt = lambda s: "{" + ",".join(map(str, sorted(s))) + "}" if s else "{}"
        parts = [str(self.J), fmt(self.P)] + [fmt(self.shells[s]) for s in range(self.J - 1, -1, -1)]
        return "(" + ", ".join(parts) + ")"


def _splits(items: Sequence[int]) -> Iterator[tuple[frozenset[int], frozenset[int]]]:
    items = sorted(items)
    for mask in range(1 << len(items)):
        p = frozenset(v for i, v in enumerate(items) if not (mask >> i) & 1)
        yield p, frozenset(items) - p


def generate_partition(n_electrons: int) -> list[PartitionIndex]:
    """Indices produced by repeatedly splitting the mixed terms of prod_j (chi_1 + chi_2).

    A split (p_s, q_s) of the current inner group terminates as J = s when
    q_s is empty and as J = s + 1 when p_s is empty; otherwise p_s is split
    again at the next scale.
    """
    n = int(n_electrons)
    if n < 1:
        raise UnsupportedN(f"electron count must be >= 1, got {n_electrons}")
    if n == 1:
        return [PartitionIndex(0, frozenset(), (), 1)]
    out: list[PartitionIndex] = []

    def rec(inner: frozenset[int], shells: tuple[frozenset[int], ...], s: int) -> None:
        for p, q in _splits(inner):
            if not q:
                out.append(PartitionIndex(s, p, shells, n))
            elif not p:
                out.append(PartitionIndex(s + 1, frozenset(), shells + (q,), n))
            else:
                rec(p, shells + (q,), s + 1)

    rec(frozenset(range(2, n + 1)), (), 0)
    return out


def fubini_count(n: int) -> int:
    """Number of ordered set partitions of n labelled items."""
    a = [1]
    for m in range(1, n + 1):
        a.append(sum(math.comb(m, k) * a[m - k] for k in range(1, m + 1)))
    return a[n]


class CutoffPair:
    """chi_1 = 1 - chi_2 with chi_2 rising from 0 at t = 1/4 to 1 at t = 3/4.

    ``kind="poly7"`` uses the degree-7 smoothstep 35u^4 - 84u^5 + 70u^6 - 20u^7
    with u = 2t - 1/2 (three continuous derivatives at the joins, closed form
    to any order). ``kind="smooth"`` uses the C-infinity profile
    e^{-1/u}/(e^{-1/u} + e^{-1/(1-u)}), differentiated with jets.
    """

    lo = 0.25
    hi = 0.75

    def __init__(self, kind: str = "poly7"):
        if kind not in ("poly7", "smooth"):
            raise ConfigError(f"unknown cutoff kind {kind!r}")
        self.kind = kind

    def __repr__(self) -> str:
        return f"CutoffPair({self.kind!r})"

    def derivatives(self, t, order: int) -> np.ndarray:
        """chi_2 and its derivatives 0..order at points t, shape (order+1,) + t.shape."""
        t = np.asarray(t, dtype=float)
        if self.kind == "poly7":
            return _kernels.cutoff_derivatives(t, order, self.lo, self.hi)
        return _smooth_step_derivatives(t, order, self.lo, self.hi)

    def chi2(self, t):
        return J.compose(t, self.derivatives, lambda v: self.derivatives(v, 0)[0])

    def chi1(self, t):
        return 1.0 - self.chi2(t)


def _smooth_step_derivatives(t: np.ndarray, order: int, lo: float, hi: float) -> np.ndarray:
    scale = 1.0 / (hi - lo)
    u = (t - lo) * scale
    out = np.zeros((order + 1,) + t.shape)
    out[0][u >= 1] = 1.0
    inside = (u > 0) & (u < 1)
    if not np.any(inside):
        return out
    ui = u[inside]
    if order == 0:
        a, b = np.exp(-1 / ui), np.exp(-1 / (1 - ui))
        out[0][inside] = a / (a + b)
        return out
    v = J.Jet.variable(ui, 0, 1, order)
    a = J.exp(-1.0 * J.recip(v))
    b = J.exp(-1.0 * J.recip(1.0 - v))
    val = a * J.recip(a + b)
    d = val.derivatives()
    for n in range(order + 1):
        out[n][inside] = d[n] * scale**n
    return out


def _ratio(coords, j: int, x1norm, shift: bool):
    xj = coords[j - 1]
    if shift:
        xj = (coords[0][0] + xj[0], coords[0][1] + xj[1], coords[0][2] + xj[2])
    return J.norm3(xj) * J.recip(x1norm)


def _chi_product(coords, index: PartitionIndex, cuts: CutoffPair, shift: frozenset[int]):
    x1n = J.norm3(coords[0])
    out = 1.0
    for j in index.P:
        out = out * cuts.chi1(4.0**index.J * _ratio(coords, j, x1n, j in shift))
    for s, q in enumerate(index.shells):
        for j in q:
            t = _ratio(coords, j, x1n, j in shift)
            out = out * cuts.chi2(4.0**s * t)
            if s >= 1:
                out = out * cuts.chi1(4.0 ** (s - 1) * t)
    return out


def chi_field(index: PartitionIndex, cuts: CutoffPair | None = None) -> ScalarField:
    cuts = cuts or CutoffPair()
    return lambda c: _chi_product(c, index, cuts, frozenset())


def chi_tilde_field(index: PartitionIndex, cuts: CutoffPair | None = None) -> ScalarField:
    """chi_I evaluated at the configuration with x_j replaced by x_1 + x_j off {1} and P_J."""
    cuts = cuts or CutoffPair()
    return lambda c: _chi_product(c, index, cuts, index.shifted)


def _check_x1(xb: np.ndarray) -> None:
    if np.any(np.linalg.norm(xb[:, 0], axis=-1) == 0.0):
        raise CenterElectronAtOrigin("electron 1 sits at the origin; the partition is defined for x_1 != 0")


def _evaluate(field: ScalarField, x, n: int):
    xb, single = as_batch(x)
    if xb.shape[1] != n:
        raise ConfigError(f"configuration has {xb.shape[1]} electrons, index is for {n}")
    _check_x1(xb)
    with np.errstate(divide="ignore", invalid="ignore"):
        val = np.broadcast_to(np.asarray(field(coords_of(xb)), dtype=float), (xb.shape[0],))
    return float(val[0]) if single else np.array(val)


def chi_I(x, index: PartitionIndex, cuts: CutoffPair | None = None):
    return _evaluate(chi_field(index, cuts), x, index.n_electrons)


def chi_I_tilde(x, index: PartitionIndex, cuts: CutoffPair | None = None):
    return _evaluate(chi_tilde_field(index, cuts), x, index.n_electrons)


def _proposal(rng: np.random.Generator, n: int, n_electrons: int) -> np.ndarray:
    """x_1 uniform on the unit sphere times a log-uniform radius, other ratios log-uniform."""
    x = np.empty((n, n_electrons, 3))
    dirs = rng.standard_normal((n, n_electrons, 3))
    dirs /= np.linalg.norm(dirs, axis=-1, keepdims=True)
    r1 = 10.0 ** rng.uniform(-2, 2, n)
    x[:, 0] = dirs[:, 0] * r1[:, None]
    lo, hi = -(n_electrons + 1) * math.log10(4.0), math.log10(4.0)
    t = 10.0 ** rng.uniform(lo, hi, (n, n_electrons - 1))
    x[:, 1:] = dirs[:, 1:] * (t * r1[:, None])[:, :, None]
    return x


def sample_support(index: PartitionIndex, n: int, seed=None, cuts: CutoffPair | None = None,
                   max_failures: int = 10**6, tilde: bool = False) -> np.ndarray:
    """Rejection samples x with chi_I(x) > 0 (or chi-tilde > 0)."""
    rng = np.random.default_rng(seed)
    field = chi_tilde_field(index, cuts) if tilde else chi_field(index, cuts)
    got: list[np.ndarray] = []
    have = 0
    failures = 0
    batch = max(256, 2 * n)
    while have < n:
        x = _proposal(rng, batch, index.n_electrons)
        if tilde:
            for j in index.shifted:
                x[:, j - 1] -= x[:, 0]
        keep = x[np.asarray(field(coords_of(x))) > 0]
        failures += batch - keep.shape[0]
        got.append(keep)
        have += keep.shape[0]
        if have < n and failures >= max_failures:
            raise EmptySupportSample(f"only {have} of {n} support samples after {failures} rejections for {index}")
    return np.concatenate(got)[:n]


def verify_support_control(index: PartitionIndex, samples: np.ndarray | None = None, n: int = 10**4,
                           seed=None, cuts: CutoffPair | None = None) -> dict:
    """Worst sampled |x_1|/distance ratios for the three controlled families."""
    x = sample_support(index, n, seed, cuts) if samples is None else as_batch(samples)[0]
    nrm = np.linalg.norm
    r1 = nrm(x[:, 0], axis=-1)
    shells = list(index.shells)
    all_q = frozenset().union(*shells) if shells else frozenset()
    upper_q = frozenset().union(*shells[1:]) if len(shells) > 1 else frozenset()
    # None marks a family that is empty for this index.
    fam: dict[str, float | None] = {"nucleus": None, "electron_one": None, "inner_outer": None}

    def bump(key, vals):
        m = float(np.max(vals))
        fam[key] = m if fam[key] is None else max(fam[key], m)

    with np.errstate(divide="ignore"):
        for j in all_q:
            bump("nucleus", r1 / nrm(x[:, j - 1], axis=-1))
        for j in upper_q | index.P:
            bump("electron_one", r1 / nrm(x[:, 0] - x[:, j - 1], axis=-1))
        for j in index.P:
            for k in all_q:
                bump("inner_outer", r1 / nrm(x[:, j - 1] - x[:, k - 1], axis=-1))
    bound = 4.0 ** (index.n_electrons + 1)
    return {"index": str(index), "samples": int(x.shape[0]), "ratios": fam, "bound": bound,
            "pass": all(v is None or (np.isfinite(v) and v <= bound) for v in fam.values())}


def verify_chi_tilde_derivative_bounds(index: PartitionIndex, beta: Sequence[int], n_weight: int = 0,
                                       seed=None, cuts: CutoffPair | None = None, n0: int = 1024,
                                       n_max: int = 2**15, rtol: float = 0.05) -> dict:
    """Empirical sup of |d^beta_{x_1} chi-tilde| |x_1|^{|beta|}, optionally with distance weights.

    With ``n_weight = n > 0`` the quantity is multiplied by (|y|/|x_1|)^n for
    y = x_j and, separately, y = x_1 + x_j; the report keeps the smallest sup
    over j and the two forms, which is the bounded one the estimate asserts.
    """
    b = tuple(int(v) for v in beta)
    if len(b) != 3 or any(v < 0 for v in b):
        raise ConfigError("beta must be a 3-component multi-index")
    if sum(b) > 4 or n_weight > 3:
        raise ConfigError("supported range is |beta| <= 4 and n <= 3")
    n = index.n_electrons
    field = chi_tilde_field(index, cuts)
    alpha = MultiIndex(b + (0,) * (3 * (n - 1)))
    rng = np.random.default_rng(seed)

    def draw(m):
        x = _proposal(rng, m, n)
        for j in index.shifted:
            x[:, j - 1] -= x[:, 0]
        return x

    def base(x):
        d = partial_all(field, x, alpha)[alpha] if sum(b) else np.asarray(field(coords_of(x)))
        return np.abs(d) * np.linalg.norm(x[:, 0], axis=-1) ** sum(b)

    results: dict[str, SupEstimate] = {}
    if n_weight == 0 or n == 1:
        results["plain"] = empirical_sup(base, draw, n0, n_max, rtol)
    else:
        for j in range(2, n + 1):
            for form in ("x_j", "x_1+x_j"):
                def fn(x, j=j, form=form):
                    y = x[:, j - 1] + (x[:, 0] if form == "x_1+x_j" else 0.0)
                    w = (np.linalg.norm(y, axis=-1) / np.linalg.norm(x[:, 0], axis=-1)) ** n_weight
                    return base(x) * w
                results[f"{form}[j={j}]"] = empirical_sup(fn, draw, n0, n_max, rtol)
    best_key = min(results, key=lambda k: results[k].value)
    best = results[best_key]
    return {"index": str(index), "beta": b, "n_weight": n_weight, "form": best_key,
            "sup": best.value, "samples": best.n_samples, "stable": best.stable,
            "all": {k: v.value for k, v in results.items()},
            "pass": bool(np.isfinite(best.value) and best.stable)}


def partition_sum_error(n_electrons: int, n_points: int = 10**4, seed=None, cuts: CutoffPair | None = None) -> dict:
    """max |sum_I chi_I(x) - 1| over random configurations with x_1 != 0.

    Half the points are Gaussian, half come from the multi-scale proposal so
    that every cutoff transition is visited.
    """
    rng = np.random.default_rng(seed)
    half = n_points // 2
    x = np.concatenate([rng.normal(size=(n_points - half, n_electrons, 3)), _proposal(rng, half, n_electrons)])
    x = x[np.linalg.norm(x[:, 0], axis=-1) > 0]
    total = np.zeros(x.shape[0])
    indices = generate_partition(n_electrons)
    for index in indices:
        total = total + chi_I(x, index, cuts)
    err = np.abs(total - 1.0)
    return {"n_electrons": n_electrons, "points": int(x.shape[0]), "indices": len(indices),
            "max_error": float(err.max()), "min_sum": float(total.min()), "max_sum": float(total.max())}
