"""Jastrow-type regularization of Coulomb eigenfunctions.

Each singular term coef/|u| of the potential (u = x_j - R_k or x_j - x_k)
is either kept in the "singular part" V_part or absorbed into a smooth
exponent F through the profile w (|u| - sqrt(|u|^2 + 1)), with w = b/2 for
one-body terms and c/4 for pair terms. Absorbing a term cancels its 1/|u|
singularity in V - Delta F and leaves the bounded remainder
w m (2|u|^2 + 3)/(|u|^2 + 1)^{3/2}, where m = 2 for pairs (both electrons
move) and m = 1 otherwise. The three variants only differ in which terms
are absorbed:

* ``TildeVariant``: all terms (V_part = 0, K includes -E);
* ``AlphaVariant(alpha)``: terms not touching supp(alpha);
* ``ClusterVariant(Q)``: terms not touching Q plus the pairs inside Q.

With psi_F = exp(-F) psi an eigenfunction satisfies
-Delta psi_F - 2 grad F . grad psi_F + (V_part + K - E) psi_F = 0.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np

from .calculus import jet as J
from .calculus.derivatives import (
    ScalarField,
    cluster_partial,
    coords_of,
    evaluate,
    partial_all,
    value_grad_laplacian,
)
from .config import ClusterSet, MultiIndex, PotentialSpec, as_batch, as_configuration
from .errors import ConfigError, InvalidVariant, OnSingularSet
from .geometry import ByAlpha, dist_to_selected, lambda_reg
from .sampling import BallSampler, SupEstimate, empirical_sup

__all__ = [
    "TildeVariant",
    "AlphaVariant",
    "ClusterVariant",
    "JastrowVariant",
    "Term",
    "RegularizedSystem",
    "build_system",
    "vanishing_derivative_check",
    "regularized_residual",
    "RescaledFields",
    "rescaled_coefficients",
    "rescaled_potential_bound",
    "smoothing_laplacian",
    "vanishing_sweep",
]


@dataclass(frozen=True)
class TildeVariant:
    pass


@dataclass(frozen=True)
class AlphaVariant:
    alpha: MultiIndex

    def __post_init__(self) -> None:
        a = MultiIndex.coerce(self.alpha)
        if a.order < 1:
            raise InvalidVariant("the alpha variant needs |alpha| >= 1")
        object.__setattr__(self, "alpha", a)


@dataclass(frozen=True)
class ClusterVariant:
    cluster: ClusterSet


JastrowVariant = Union[TildeVariant, AlphaVariant, ClusterVariant]


@dataclass(frozen=True)
class Term:
    """coef/|x_a - x_b| (pair) or coef/|x_a - R_b| (one-body); a, b for pairs are 1-based."""

    a: int
    b: int
    coef: float
    pair: bool

    @property
    def weight(self) -> float:
        return self.coef / 4 if self.pair else self.coef / 2

    @property
    def multiplicity(self) -> int:
        return 2 if self.pair else 1

    def rel(self, coords, centers: np.ndarray):
        if self.pair:
            return J.sub3(coords[self.a - 1], coords[self.b - 1])
        return J.sub3(coords[self.a - 1], centers[self.b])


def smoothing_laplacian(s):
    """Delta_u sqrt(|u|^2 + 1) in R^3 as a function of s = |u|^2."""
    return (2 * s + 3) * J.power(s + 1.0, -1.5)


def _split_terms(variant: JastrowVariant, spec: PotentialSpec) -> tuple[list[Term], list[Term]]:
    """Return (absorbed terms, singular terms kept in V_part)."""
    ones = [Term(j, k, b, False) for j, k, b in spec.one_body_terms()]
    pairs = [Term(i, j, c, True) for i, j, c in spec.pair_terms()]
    if isinstance(variant, TildeVariant):
        return ones + pairs, []
    if isinstance(variant, AlphaVariant):
        if variant.alpha.n_electrons != spec.n_electrons:
            raise ConfigError("multi-index length does not match the electron count")
        q = variant.alpha.support
        absorbed = [t for t in ones if t.a not in q] + [t for t in pairs if t.a not in q and t.b not in q]
        kept = [t for t in ones if t.a in q] + [t for t in pairs if t.a in q or t.b in q]
        return absorbed, kept
    if isinstance(variant, ClusterVariant):
        if variant.cluster.n_electrons != spec.n_electrons:
            raise ConfigError("cluster size does not match the electron count")
        q = variant.cluster.members
        absorbed = [t for t in ones if t.a not in q] + [t for t in pairs if (t.a in q) == (t.b in q)]
        kept = [t for t in ones if t.a in q] + [t for t in pairs if (t.a in q) != (t.b in q)]
        return absorbed, kept
    raise InvalidVariant(f"unknown variant {variant!r}")


def _safe_unit(u, r):
    """u/|u| for plain arrays (0 where |u| = 0); jets go through normal division."""
    if isinstance(r, J.Jet):
        inv = J.recip(r)
        return [c * inv for c in u]
    with np.errstate(invalid="ignore", divide="ignore"):
        return [np.where(r > 0, c / np.where(r > 0, r, 1.0), 0.0) for c in u]


@dataclass
class RegularizedSystem:
    """Fields of the transformed equation for one variant, potential and energy."""

    variant: JastrowVariant
    spec: PotentialSpec
    E: complex | float
    absorbed: list[Term] = field(repr=False)
    singular: list[Term] = field(repr=False)

    @property
    def centers(self) -> np.ndarray:
        return self.spec.centers

    @property
    def energy_in_K(self) -> bool:
        return isinstance(self.variant, TildeVariant)

    # Each field below takes a coordinate list (arrays or jets).

    def F(self, coords):
        out = 0.0
        for t in self.absorbed:
            u = t.rel(coords, self.centers)
            s = J.sqnorm3(u)
            out = out + t.weight * (J.norm3(u) - J.sqrt(s + 1.0))
        return out

    def grad_F(self, coords) -> list[list]:
        g = [[0.0, 0.0, 0.0] for _ in range(self.spec.n_electrons)]
        for t in self.absorbed:
            u = t.rel(coords, self.centers)
            s = J.sqnorm3(u)
            unit = _safe_unit(u, J.norm3(u))
            inv = J.power(s + 1.0, -0.5)
            comp = [t.weight * (unit[i] - u[i] * inv) for i in range(3)]
            for i in range(3):
                g[t.a - 1][i] = g[t.a - 1][i] + comp[i]
                if t.pair:
                    g[t.b - 1][i] = g[t.b - 1][i] - comp[i]
        return g

    def grad_F_sq(self, coords):
        return sum(J.sqnorm3(v) for v in self.grad_F(coords))

    def G(self, coords):
        out = 0.0
        for t in self.absorbed:
            s = J.sqnorm3(t.rel(coords, self.centers))
            out = out + (t.weight * t.multiplicity) * smoothing_laplacian(s)
        return out

    def K(self, coords):
        k = self.G(coords) - self.grad_F_sq(coords)
        return k - self.E if self.energy_in_K else k

    def V_part(self, coords):
        return _coulomb(self.singular, coords, self.centers)

    def V(self, coords):
        return _coulomb(self.absorbed + self.singular, coords, self.centers)

    def zeroth_order(self, coords):
        """Coefficient of psi_F in the transformed equation."""
        if self.energy_in_K:
            return self.K(coords)
        return self.V_part(coords) + self.K(coords) - self.E

    def transform(self, psi: ScalarField) -> ScalarField:
        """psi_F = exp(-F) psi as a jet-liftable field."""
        return lambda c: J.exp(-self.F(c)) * psi(c)

    def untransform(self, psi_f: ScalarField) -> ScalarField:
        return lambda c: J.exp(self.F(c)) * psi_f(c)


def _coulomb(terms: Sequence[Term], coords, centers):
    out = 0.0
    for t in terms:
        out = out + t.coef * J.recip(J.norm3(t.rel(coords, centers)))
    return out


def build_system(variant: JastrowVariant, spec: PotentialSpec, E: complex | float = 0.0) -> RegularizedSystem:
    absorbed, singular = _split_terms(variant, spec)
    return RegularizedSystem(variant, spec, E, absorbed, singular)


def vanishing_derivative_check(system: RegularizedSystem, beta, samples, fields: Sequence[str] = ("F", "K")) -> float:
    """Max |d^beta F|, |d^beta K| (or cluster derivatives) over sample configurations.

    For the alpha variant every 0 < beta <= alpha is allowed; for the cluster
    variant beta is a non-zero 3-vector. The F-tilde variant carries no such
    identity and is rejected.
    """
    xb, _ = as_batch(samples)
    v = system.variant
    if isinstance(v, TildeVariant):
        raise InvalidVariant("no vanishing-derivative identity holds for the all-absorbing variant")
    worst = 0.0
    for name in fields:
        f = getattr(system, name)
        if isinstance(v, AlphaVariant):
            b = MultiIndex.coerce(beta, system.spec.n_electrons)
            if b.order == 0 or not b <= v.alpha:
                raise ConfigError(f"beta={b} must satisfy 0 < beta <= alpha={v.alpha}")
            val = partial_all(f, xb, b)[b]
        else:
            b3 = tuple(int(e) for e in beta)
            if len(b3) != 3 or sum(b3) == 0:
                raise ConfigError("cluster beta must be a non-zero 3-component multi-index")
            val = cluster_partial(f, xb, v.cluster, b3)
        worst = max(worst, float(np.max(np.abs(val))))
    return worst


def regularized_residual(system: RegularizedSystem, psi: ScalarField, x, return_scale: bool = False):
    """|-Delta psi_F - 2 grad F . grad psi_F + c0 psi_F| at x (single point or batch).

    With ``return_scale`` the sum of the absolute values of the three terms is
    returned too, the natural magnitude to compare the residual against.
    """
    xb, single = as_batch(x)
    psi_f = system.transform(psi)
    val, grad, lap = value_grad_laplacian(psi_f, xb)
    coords = coords_of(xb)
    gF = system.grad_F(coords)
    drift = sum(np.asarray(gF[k][s]) * grad[:, k, s] for k in range(xb.shape[1]) for s in range(3))
    c0 = np.broadcast_to(np.asarray(system.zeroth_order(coords)), val.shape)
    res = np.abs(-lap - 2 * drift + c0 * val)
    scale = np.abs(lap) + 2 * np.abs(drift) + np.abs(c0 * val)
    if single:
        res, scale = float(res[0]), float(scale[0])
    return (res, scale) if return_scale else res


def rescaled_potential_bound(gamma, R: float, n_electrons: int, Z: float, pair_coupling: float = 1.0) -> float:
    """Explicit constant bounding |d^gamma| of the rescaled singular potential on B(0, R).

    For unit pair coupling this is sqrt(2)/(1-R) N (8/(1-R))^|gamma| gamma! (Z + 2N - 1);
    a general pair coupling c scales the electron-electron share 2N - 1 by |c|.
    """
    if not 0 < R < 1:
        raise ConfigError("R must lie in (0, 1)")
    g = MultiIndex.coerce(gamma) if not isinstance(gamma, MultiIndex) else gamma
    gfact = g.factorial
    return (math.sqrt(2) / (1 - R)) * n_electrons * (8 / (1 - R)) ** g.order * gfact * (
        Z + (2 * n_electrons - 1) * abs(pair_coupling))


@dataclass
class RescaledFields:
    """Coefficients of the transformed equation seen on the unit ball around x0.

    y -> lambda V_alpha(x0 + lambda y), grad F_alpha(x0 + lambda y), K_alpha(x0 + lambda y).
    """

    system: RegularizedSystem
    x0: np.ndarray
    lam: float

    def _shift(self, coords_y):
        return [[self.x0[k, s] + self.lam * coords_y[k][s] for s in range(3)] for k in range(len(coords_y))]

    def V(self, coords_y):
        return self.lam * self.system.V_part(self._shift(coords_y))

    def H(self, coords_y, component: int | None = None):
        g = self.system.grad_F(self._shift(coords_y))
        if component is None:
            return g
        return g[component // 3][component % 3]

    def H_component(self, component: int) -> ScalarField:
        return lambda c: self.H(c, component)

    def K(self, coords_y):
        return self.system.K(self._shift(coords_y))

    def field(self, name: str) -> ScalarField:
        if name.startswith("H"):
            return self.H_component(int(name[1:]))
        return getattr(self, name)

    def derivative_sup(self, gamma, R: float = 0.5, name: str = "V", seed=None,
                       n0: int = 1024, n_max: int = 2**15, rtol: float = 0.01) -> SupEstimate:
        """Empirical sup over B(0, R) of |d^gamma| of a rescaled field, quasi-random sampling."""
        n = self.system.spec.n_electrons
        g = MultiIndex.coerce(gamma, n)
        sampler = BallSampler(3 * n, R, seed=seed, quasi=True)
        f = self.field(name)

        def fn(pts):
            ys = pts.reshape(-1, n, 3)
            return partial_all(f, ys, g)[g] if g.order else evaluate(f, ys)

        return empirical_sup(fn, sampler.draw, n0=n0, n_max=n_max, rtol=rtol)

    def bound_report(self, gamma, R: float = 0.5, seed=None, **kw) -> dict:
        spec = self.system.spec
        sup = self.derivative_sup(gamma, R, "V", seed=seed, **kw)
        bound = rescaled_potential_bound(gamma, R, spec.n_electrons, spec.Z, spec.max_pair)
        return {"gamma": str(MultiIndex.coerce(gamma, spec.n_electrons)), "R": R, "lambda": self.lam,
                "empirical_sup": sup.value, "samples": sup.n_samples, "stable": sup.stable,
                "bound": bound, "pass": bool(sup.value <= bound)}


def rescaled_coefficients(system: RegularizedSystem, x0) -> RescaledFields:
    """Rescaled coefficient fields around x0 for an alpha-variant system."""
    if not isinstance(system.variant, AlphaVariant):
        raise InvalidVariant("rescaled coefficients are defined for the alpha variant")
    x0 = as_configuration(x0, system.spec.n_electrons)
    d = dist_to_selected(x0, ByAlpha(system.variant.alpha), system.spec)
    lam = lambda_reg(d)
    if lam <= 0:
        raise OnSingularSet("x0 lies on the coalescence set selected by alpha")
    return RescaledFields(system, x0, lam)


def _multi_indices(n_vars: int, max_order: int):
    for order in range(1, max_order + 1):
        for combo in itertools.combinations_with_replacement(range(n_vars), order):
            e = [0] * n_vars
            for i in combo:
                e[i] += 1
            yield tuple(e)


def vanishing_sweep(spec: PotentialSpec, samples, max_order: int = 3, electrons: Sequence[int] = (1, 2),
                    clusters: Sequence[Sequence[int]] | None = None) -> dict:
    """Largest |d^beta F|, |d^beta K| over every alpha and cluster derivative up to ``max_order``.

    Alpha variants run over all multi-indices supported on ``electrons`` with
    |alpha| <= max_order and every 0 < beta <= alpha; cluster variants over
    ``clusters`` (default {1}, {1,2}, all) and every 0 < |beta| <= max_order.
    """
    n = spec.n_electrons
    xb, _ = as_batch(samples)
    active = [e for e in electrons if e <= n]
    flat = [3 * (e - 1) + s for e in active for s in range(3)]
    worst_alpha = 0.0
    n_alpha = 0
    for local in _multi_indices(len(flat), max_order):
        entries = [0] * (3 * n)
        for i, v in zip(flat, local):
            entries[i] = v
        alpha = MultiIndex(tuple(entries))
        system = build_system(AlphaVariant(alpha), spec)
        for beta in alpha.sub_indices():
            if beta.order:
                worst_alpha = max(worst_alpha, vanishing_derivative_check(system, beta, xb))
                n_alpha += 1
    if clusters is None:
        clusters = [[1]] + ([[1, 2]] if n >= 2 else []) + ([list(range(1, n + 1))] if n >= 3 else [])
    worst_cluster = 0.0
    n_cluster = 0
    for members in clusters:
        system = build_system(ClusterVariant(ClusterSet(members, n)), spec)
        for beta in _multi_indices(3, max_order):
            worst_cluster = max(worst_cluster, vanishing_derivative_check(system, beta, xb))
            n_cluster += 1
    return {"alpha_max": worst_alpha, "alpha_checks": n_alpha, "cluster_max": worst_cluster,
            "cluster_checks": n_cluster, "max": max(worst_alpha, worst_cluster)}
