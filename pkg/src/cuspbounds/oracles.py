"""Exactly solvable eigenstates: hydrogenic orbitals and products of them.

A radial profile is stored as a Laurent polynomial P(r) times exp(-c r).
That representation is closed under d/dr and under (1/r) d/dr, which gives
closed-form derivatives of every order without touching the jet engine, and
lets the eigenvalue be derived symbolically instead of typed in.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from itertools import product as iproduct
from typing import Sequence

import numpy as np

from .calculus import jet as J
from .calculus.derivatives import laplacian
from .config import MultiIndex, PotentialSpec, as_batch, potential_value
from .errors import ConfigError, NonSmoothPoint, ResidualTooLarge
from .geometry import dist_to_sigma

__all__ = [
    "RadialProfile",
    "Orbital",
    "OracleState",
    "hydrogen_ground",
    "hydrogen_2s",
    "product_state",
    "exact_partial",
    "exact_gradient",
    "exact_cluster_partial",
    "eigen_residual",
]


@dataclass(frozen=True)
class RadialProfile:
    """sum_n coef[n] r^n exp(-c r) with integer (possibly negative) powers n."""

    coef: tuple[tuple[int, float], ...]
    c: float

    @classmethod
    def make(cls, terms: dict[int, float], c: float) -> "RadialProfile":
        clean = tuple(sorted((int(n), float(v)) for n, v in terms.items() if v != 0.0))
        return cls(clean, float(c))

    @property
    def terms(self) -> dict[int, float]:
        return dict(self.coef)

    def d_dr(self) -> "RadialProfile":
        out: dict[int, float] = {}
        for n, v in self.coef:
            if n:
                out[n - 1] = out.get(n - 1, 0.0) + n * v
            out[n] = out.get(n, 0.0) - self.c * v
        return RadialProfile.make(out, self.c)

    def half_radial(self) -> "RadialProfile":
        """(1/(2r)) d/dr, i.e. d/ds for s = r^2."""
        out: dict[int, float] = {}
        for n, v in self.coef:
            if n:
                out[n - 2] = out.get(n - 2, 0.0) + 0.5 * n * v
            out[n - 1] = out.get(n - 1, 0.0) - 0.5 * self.c * v
        return RadialProfile.make(out, self.c)

    def times(self, n: int, v: float = 1.0) -> "RadialProfile":
        return RadialProfile.make({k + n: c * v for k, c in self.coef}, self.c)

    def __add__(self, other: "RadialProfile") -> "RadialProfile":
        if other.c != self.c:
            raise ValueError("profiles with different decay rates cannot be added")
        out = self.terms
        for n, v in other.coef:
            out[n] = out.get(n, 0.0) + v
        return RadialProfile.make(out, self.c)

    def __call__(self, r):
        r = np.asarray(r, dtype=float)
        poly = sum(v * r**n for n, v in self.coef) if self.coef else np.zeros_like(r)
        return poly * np.exp(-self.c * r)

    def field(self, r):
        """Jet-liftable evaluation at a radius value (array or jet)."""
        poly = 0.0
        for n, v in self.coef:
            poly = poly + v * (r**n if n >= 0 else J.power(r, n))
        return poly * J.exp(-self.c * r)

    def laplacian(self) -> "RadialProfile":
        """Radial part of the 3D Laplacian: f'' + 2 f'/r."""
        d1 = self.d_dr()
        return d1.d_dr() + d1.times(-1, 2.0)

    def norm_sq(self) -> float:
        """Integral over R^3 of the square of the profile."""
        sq: dict[int, float] = {}
        for (n, a), (m, b) in iproduct(self.coef, self.coef):
            sq[n + m] = sq.get(n + m, 0.0) + a * b
        tot = 0.0
        for n, v in sq.items():
            if n + 2 < 0:
                raise ValueError("profile is not square integrable at the origin")
            tot += v * math.factorial(n + 2) / (2 * self.c) ** (n + 3)
        return 4 * math.pi * tot


@dataclass(frozen=True)
class Orbital:
    """One-electron eigenfunction of -Delta - Z/|x| with a symbolic profile."""

    kind: str
    Z: float
    profile: RadialProfile = field(repr=False)
    energy: float

    @classmethod
    def build(cls, kind: str, Z: float) -> "Orbital":
        if not Z > 0:
            raise ConfigError(f"orbital charge must be positive, got {Z}")
        if kind == "1s":
            prof = RadialProfile.make({0: 1.0}, Z / 2)
        elif kind == "2s":
            prof = RadialProfile.make({0: 1.0, 1: -Z / 4}, Z / 4)
        else:
            raise ConfigError(f"unknown orbital kind {kind!r} (expected '1s' or '2s')")
        return cls(kind, float(Z), prof, _symbolic_energy(prof, Z))

    @property
    def decay(self) -> float:
        return self.profile.c

    @cached_property
    def norm_sq(self) -> float:
        return self.profile.norm_sq()

    def density(self, x):
        """|phi|^2/||phi||^2, a probability density on R^3."""
        return self.value(x) ** 2 / self.norm_sq

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        """Exact draws from the normalized |phi|^2 density, shape (n, 3)."""
        if self.kind == "1s":
            r = rng.gamma(3.0, 1.0 / self.Z, n)
        else:
            # (1 - Z r/4)^2 <= 1 + Z^2 r^2/16: propose from the Gamma(3) / Gamma(5) mixture and thin.
            r = np.empty(0)
            while r.size < n:
                m = 2 * (n - r.size) + 16
                shape = np.where(rng.random(m) < 0.25, 3.0, 5.0)
                prop = rng.gamma(shape, 2.0 / self.Z)
                u = self.Z * prop / 4
                keep = rng.random(m) * (1 + u**2) < (1 - u) ** 2
                r = np.concatenate([r, prop[keep]])
            r = r[:n]
        d = rng.standard_normal((n, 3))
        d /= np.linalg.norm(d, axis=1, keepdims=True)
        return d * r[:, None]

    def value(self, x):
        return self.profile(np.linalg.norm(np.asarray(x, dtype=float), axis=-1))

    def partial(self, x, a: Sequence[int]):
        """Closed-form d^a phi at points x (..., 3), via phi(x) = h(|x|^2)."""
        x = np.asarray(x, dtype=float)
        a = tuple(int(v) for v in a)
        r = np.linalg.norm(x, axis=-1)
        if sum(a) and np.any(r == 0):
            raise NonSmoothPoint("orbital derivative requested at the nucleus")
        hs = [self.profile]
        for _ in range(sum(a)):
            hs.append(hs[-1].half_radial())
        total = 0.0
        for js in iproduct(*[range(ai // 2 + 1) for ai in a]):
            w = 1.0
            for i, (ai, ji) in enumerate(zip(a, js)):
                w = w * (math.factorial(ai) / (math.factorial(ji) * math.factorial(ai - 2 * ji))) \
                    * (2 * x[..., i]) ** (ai - 2 * ji)
            total = total + w * hs[sum(a) - sum(js)](r)
        return total


def _symbolic_energy(prof: RadialProfile, Z: float) -> float:
    """E such that (-Delta - Z/r) phi = E phi, derived coefficient by coefficient."""
    lhs = prof.laplacian().times(0, -1.0) + prof.times(-1, -Z)
    top = max(n for n, _ in prof.coef)
    E = lhs.terms.get(top, 0.0) / prof.terms[top]
    rest = lhs + prof.times(0, -E)
    scale = max(abs(v) for _, v in lhs.coef)
    if any(abs(v) > 1e-12 * scale for _, v in rest.coef):
        raise ResidualTooLarge(f"profile is not an eigenfunction: remainder {rest.coef}")
    return E


@dataclass(frozen=True)
class OracleState:
    """Product of orbitals; an exact eigenfunction of the non-interacting operator."""

    orbitals: tuple[Orbital, ...]
    spec: PotentialSpec

    @property
    def n_electrons(self) -> int:
        return len(self.orbitals)

    @property
    def E(self) -> float:
        return float(sum(o.energy for o in self.orbitals))

    @cached_property
    def norm_sq(self) -> float:
        return math.prod(o.profile.norm_sq() for o in self.orbitals)

    def psi(self, coords):
        """Jet-liftable field."""
        out = 1.0
        for k, o in enumerate(self.orbitals):
            out = out * o.profile.field(J.norm3(coords[k]))
        return out

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        """Draws from |psi|^2/||psi||^2, shape (n, N, 3)."""
        return np.stack([o.sample(rng, n) for o in self.orbitals], axis=1)

    def density(self, x):
        """|psi|^2/||psi||^2 at configurations (B, N, 3)."""
        xb, _ = as_batch(x)
        return np.prod([o.density(xb[:, k]) for k, o in enumerate(self.orbitals)], axis=0)

    def value(self, x):
        xb, single = as_batch(x)
        v = np.prod([o.value(xb[:, k]) for k, o in enumerate(self.orbitals)], axis=0)
        return float(v[0]) if single else v

    def decay_rate(self) -> float:
        """A rate c0 with |psi(x)| <= C0 exp(-c0 |x|)."""
        return min(o.decay for o in self.orbitals) * 0.9 / math.sqrt(self.n_electrons)

    def decay_witness(self, n_samples: int = 20000, seed: int = 0, radius: float = 30.0) -> tuple[float, float]:
        """(C0, c0) with C0 the sampled max of |psi| exp(c0 |x|) over a big ball."""
        rng = np.random.default_rng(seed)
        n = self.n_electrons
        g = rng.standard_normal((n_samples, 3 * n))
        g /= np.linalg.norm(g, axis=1, keepdims=True)
        rad = radius * rng.random(n_samples)
        x = (g * rad[:, None]).reshape(-1, n, 3)
        c0 = self.decay_rate()
        return float(np.max(np.abs(self.value(x)) * np.exp(c0 * rad))), c0


def eigen_residual(state: OracleState, x) -> np.ndarray:
    """|(-Delta + V - E) psi| computed with jet Laplacians."""
    xb, single = as_batch(x)
    lap = laplacian(state.psi, xb)
    v = potential_value(state.spec, xb)
    res = np.abs(-lap + (v - state.E) * state.value(xb))
    return float(res[0]) if single else res


def _verify(state: OracleState, n_points: int = 100, seed: int = 12345) -> OracleState:
    rng = np.random.default_rng(seed)
    n = state.n_electrons
    pts = []
    while len(pts) < n_points:
        x = rng.normal(scale=1.5, size=(4 * n_points, n, 3))
        pts.extend(x[dist_to_sigma(x) >= 0.05])
    xb = np.array(pts[:n_points])
    res = eigen_residual(state, xb)
    bound = 1e-8 * (1 + np.abs(state.value(xb)))
    if np.any(res > bound):
        raise ResidualTooLarge(f"eigen-residual {res.max():.3e} exceeds tolerance")
    return state


def hydrogen_ground(Z: float = 1.0) -> OracleState:
    """exp(-Z|x|/2), an eigenfunction of -Delta - Z/|x|."""
    return _verify(OracleState((Orbital.build("1s", Z),), PotentialSpec.atomic(Z, 1)))


def hydrogen_2s(Z: float = 1.0) -> OracleState:
    return _verify(OracleState((Orbital.build("2s", Z),), PotentialSpec.atomic(Z, 1)))


def product_state(orbitals: Sequence[Orbital | str | tuple[str, float]], n_electrons: int | None = None,
                  spec: PotentialSpec | None = None) -> OracleState:
    """Product of one-electron eigenfunctions for the decoupled potential sum_j -Z_j/|x_j|."""
    orbs = tuple(_orbital(o) for o in orbitals)
    n = len(orbs) if n_electrons is None else int(n_electrons)
    if len(orbs) == 1 and n > 1:
        orbs = orbs * n
    if len(orbs) != n:
        raise ConfigError(f"got {len(orbs)} orbitals for {n} electrons")
    natural = PotentialSpec.general([-o.Z for o in orbs], 0.0, n)
    if spec is not None:
        if spec.is_interacting:
            raise ConfigError("product states are not eigenfunctions when pair couplings are non-zero")
        if spec.one_body != natural.one_body or spec.nuclei != natural.nuclei:
            raise ConfigError("spec one-body couplings do not match the orbital charges")
    return _verify(OracleState(orbs, spec or natural))


def _orbital(o) -> Orbital:
    if isinstance(o, Orbital):
        return o
    if isinstance(o, str):
        return Orbital.build(o, 1.0)
    kind, Z = o
    return Orbital.build(kind, Z)


def exact_partial(state: OracleState, x, alpha):
    """Closed-form d^alpha psi by the product rule over electrons."""
    xb, single = as_batch(x)
    a = MultiIndex.coerce(alpha, state.n_electrons)
    out = np.ones(xb.shape[0])
    for k, o in enumerate(state.orbitals):
        out = out * o.partial(xb[:, k], a.triple(k + 1))
    return float(out[0]) if single else out


def exact_gradient(state: OracleState, x) -> np.ndarray:
    """Closed-form gradient, shape (N, 3) or (B, N, 3)."""
    xb, single = as_batch(x)
    n = state.n_electrons
    vals = [o.value(xb[:, k]) for k, o in enumerate(state.orbitals)]
    g = np.empty(xb.shape)
    for k, o in enumerate(state.orbitals):
        rest = np.prod([vals[i] for i in range(n) if i != k], axis=0) if n > 1 else 1.0
        for s in range(3):
            e = [0, 0, 0]
            e[s] = 1
            g[:, k, s] = o.partial(xb[:, k], e) * rest
    return g[0] if single else g


def _distributions(total: int, slots: int):
    if slots == 1:
        yield (total,)
        return
    for first in range(total, -1, -1):
        for rest in _distributions(total - first, slots - 1):
            yield (first,) + rest


def exact_cluster_partial(state: OracleState, x, cluster, alpha3: Sequence[int]):
    """Closed-form cluster derivative: multinomial expansion of (sum_{j in Q} d_j)^alpha / sqrt|Q|^|alpha|."""
    xb, single = as_batch(x)
    members = sorted(cluster.members)
    a = tuple(int(v) for v in alpha3)
    q = len(members)
    total = np.zeros(xb.shape[0])
    per_comp = [list(_distributions(a[s], q)) for s in range(3)]
    for combo in iproduct(*per_comp):
        coef = 1.0
        entries = [0] * (3 * state.n_electrons)
        for s, dist in enumerate(combo):
            coef *= math.factorial(a[s]) / math.prod(math.factorial(v) for v in dist)
            for j, v in zip(members, dist):
                entries[3 * (j - 1) + s] = v
        total = total + coef * exact_partial(state, xb, MultiIndex(tuple(entries)))
    total = total / math.sqrt(q) ** sum(a)
    return float(total[0]) if single else total
