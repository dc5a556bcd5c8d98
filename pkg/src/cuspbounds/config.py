"""Shared value types: multi-indices, configurations, cluster sets and potentials.

Electron labels in the public API are 1-based (electron 1 is the "centre"
electron of the density and partition machinery). Arrays are 0-based.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import ConfigError, SingularEvaluation

__all__ = [
    "MultiIndex",
    "ClusterSet",
    "PotentialSpec",
    "as_configuration",
    "as_batch",
    "multiindex_order",
    "multiindex_support",
    "potential_value",
]


@dataclass(frozen=True)
class MultiIndex:
    """Derivative multi-index over R^{3N}, stored as a flat tuple of 3N ints."""

    entries: tuple[int, ...]

    def __post_init__(self) -> None:
        ent = tuple(int(e) for e in self.entries)
        if len(ent) == 0 or len(ent) % 3:
            raise ConfigError(f"multi-index length must be a positive multiple of 3, got {len(ent)}")
        if any(e < 0 for e in ent):
            raise ConfigError(f"multi-index entries must be non-negative: {ent}")
        object.__setattr__(self, "entries", ent)

    @classmethod
    def from_triples(cls, triples: Iterable[Sequence[int]]) -> "MultiIndex":
        flat: list[int] = []
        for t in triples:
            if len(t) != 3:
                raise ConfigError(f"each electron block needs 3 entries, got {tuple(t)}")
            flat.extend(t)
        return cls(tuple(flat))

    @classmethod
    def zeros(cls, n_electrons: int) -> "MultiIndex":
        return cls((0,) * (3 * n_electrons))

    @classmethod
    def coerce(cls, alpha: "MultiIndex | Sequence[int] | Sequence[Sequence[int]]",
               n_electrons: int | None = None) -> "MultiIndex":
        """Accept a MultiIndex, a flat sequence or a sequence of triples."""
        if isinstance(alpha, MultiIndex):
            out = alpha
        else:
            seq = list(alpha)
            if seq and isinstance(seq[0], (list, tuple, np.ndarray)):
                out = cls.from_triples(seq)
            else:
                out = cls(tuple(seq))
        if n_electrons is not None and out.n_electrons != n_electrons:
            if out.n_electrons == 1 and n_electrons > 1:
                raise ConfigError(f"multi-index has 3 entries but the system has {n_electrons} electrons")
            raise ConfigError(f"multi-index has length {len(out)}, expected {3 * n_electrons}")
        return out

    @property
    def n_electrons(self) -> int:
        return len(self.entries) // 3

    @property
    def order(self) -> int:
        return sum(self.entries)

    @property
    def support(self) -> frozenset[int]:
        return frozenset(k + 1 for k in range(self.n_electrons) if any(self.triple(k + 1)))

    def triple(self, electron: int) -> tuple[int, int, int]:
        i = 3 * (electron - 1)
        return self.entries[i], self.entries[i + 1], self.entries[i + 2]

    @property
    def factorial(self) -> int:
        return math.prod(math.factorial(e) for e in self.entries)

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def __getitem__(self, i):
        return self.entries[i]

    def __add__(self, other: "MultiIndex") -> "MultiIndex":
        return MultiIndex(tuple(a + b for a, b in zip(self.entries, other.entries, strict=True)))

    def __le__(self, other: "MultiIndex") -> bool:
        return all(a <= b for a, b in zip(self.entries, other.entries, strict=True))

    def sub_indices(self, include_zero: bool = False) -> list["MultiIndex"]:
        """All beta with beta <= self (componentwise), optionally excluding 0."""
        ranges = [range(e + 1) for e in self.entries]
        out = [MultiIndex(t) for t in np.ndindex(*[len(r) for r in ranges])]
        if not include_zero:
            out = [b for b in out if b.order > 0]
        return out

    def __str__(self) -> str:
        return "|".join(",".join(str(v) for v in self.triple(k + 1)) for k in range(self.n_electrons))


def multiindex_order(alpha: MultiIndex) -> int:
    return MultiIndex.coerce(alpha).order


def multiindex_support(alpha: MultiIndex) -> frozenset[int]:
    return MultiIndex.coerce(alpha).support


@dataclass(frozen=True)
class ClusterSet:
    """A non-empty set Q of 1-based electron labels within 1..N."""

    members: frozenset[int]
    n_electrons: int

    def __init__(self, members: Iterable[int], n_electrons: int):
        mem = list(members)
        if not mem:
            raise ConfigError("cluster set must be non-empty")
        if len(set(mem)) != len(mem):
            raise ConfigError(f"cluster set has duplicate members: {mem}")
        if any(int(m) != m or m < 1 or m > n_electrons for m in mem):
            raise ConfigError(f"cluster members must lie in 1..{n_electrons}: {mem}")
        object.__setattr__(self, "members", frozenset(int(m) for m in mem))
        object.__setattr__(self, "n_electrons", int(n_electrons))

    @property
    def complement(self) -> frozenset[int]:
        return frozenset(range(1, self.n_electrons + 1)) - self.members

    def __len__(self) -> int:
        return len(self.members)

    def __iter__(self):
        return iter(sorted(self.members))

    def __contains__(self, j) -> bool:
        return j in self.members


def as_configuration(x, n_electrons: int | None = None) -> np.ndarray:
    """Validate a single configuration and return it as a float (N, 3) array."""
    arr = np.asarray(x, dtype=float)
    if arr.ndim == 1:
        if arr.size % 3:
            raise ConfigError(f"flat configuration length {arr.size} is not a multiple of 3")
        arr = arr.reshape(-1, 3)
    if arr.ndim != 2 or arr.shape[1] != 3:
        raise ConfigError(f"configuration must have shape (N, 3), got {arr.shape}")
    if n_electrons is not None and arr.shape[0] != n_electrons:
        raise ConfigError(f"configuration has {arr.shape[0]} electrons, expected {n_electrons}")
    if not np.all(np.isfinite(arr)):
        raise ConfigError("configuration contains NaN or Inf")
    return arr


def as_batch(x) -> tuple[np.ndarray, bool]:
    """Return (B, N, 3) array plus a flag telling whether the input was a single point."""
    arr = np.asarray(x, dtype=float)
    if arr.ndim == 2:
        return as_configuration(arr)[None], True
    if arr.ndim == 1:
        return as_configuration(arr)[None], True
    if arr.ndim != 3 or arr.shape[2] != 3:
        raise ConfigError(f"batch must have shape (B, N, 3), got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ConfigError("configuration batch contains NaN or Inf")
    return arr, False


@dataclass(frozen=True)
class PotentialSpec:
    """Coulomb-type potential sum_{j,k} b_jk/|x_j - R_k| + sum_{i<j} c_ij/|x_i - x_j|.

    The three variants differ only in how the coefficient tables are filled:

    * atomic: one nucleus of charge Z at the origin, b = -Z, c = 1;
    * molecular: nuclei (Z_k, R_k), b_jk = -Z_k, c = 1;
    * general: one centre at the origin with per-electron constants b_j and
      per-pair constants c_ij (constant angular coefficients only).
    """

    kind: str
    n_electrons: int
    nuclei: tuple[tuple[float, float, float], ...]
    one_body: tuple[tuple[float, ...], ...]
    pair: tuple[tuple[float, ...], ...]
    charges: tuple[float, ...] = field(default=())

    @classmethod
    def atomic(cls, Z: float, n_electrons: int) -> "PotentialSpec":
        Z = _positive(Z, "atomic charge Z")
        n = _electron_count(n_electrons)
        pair = tuple(tuple(0.0 if i == j else 1.0 for j in range(n)) for i in range(n))
        return cls("atomic", n, ((0.0, 0.0, 0.0),), tuple((-Z,) for _ in range(n)), pair, (Z,))

    @classmethod
    def molecular(cls, nuclei: Sequence[tuple[float, Sequence[float]]], n_electrons: int) -> "PotentialSpec":
        n = _electron_count(n_electrons)
        if not nuclei:
            raise ConfigError("molecular potential needs at least one nucleus")
        charges = tuple(_positive(z, "nuclear charge") for z, _ in nuclei)
        pos = np.array([np.asarray(r, dtype=float) for _, r in nuclei])
        if pos.shape[1:] != (3,) or not np.all(np.isfinite(pos)):
            raise ConfigError("nuclear positions must be finite points in R^3")
        for a in range(len(pos)):
            for b in range(a + 1, len(pos)):
                if np.linalg.norm(pos[a] - pos[b]) == 0.0:
                    raise ConfigError(f"nuclei {a + 1} and {b + 1} coincide")
        pair = tuple(tuple(0.0 if i == j else 1.0 for j in range(n)) for i in range(n))
        one = tuple(tuple(-z for z in charges) for _ in range(n))
        return cls("molecular", n, tuple(tuple(map(float, p)) for p in pos), one, pair, charges)

    @classmethod
    def general(cls, b: Sequence[float] | float, c: Sequence[Sequence[float]] | float,
                n_electrons: int) -> "PotentialSpec":
        n = _electron_count(n_electrons)
        if callable(b) or callable(c):
            raise ConfigError("only constant angular coefficients b_j, c_ij are supported")
        bvec = np.broadcast_to(np.asarray(b, dtype=float), (n,)) if np.ndim(b) == 0 else np.asarray(b, dtype=float)
        if bvec.shape != (n,):
            raise ConfigError(f"b must have one constant per electron ({n}), got shape {bvec.shape}")
        if np.ndim(c) == 0:
            cmat = np.full((n, n), float(c))
        else:
            cmat = np.asarray(c, dtype=float)
            if cmat.shape != (n, n):
                raise ConfigError(f"c must be an {n}x{n} matrix, got shape {cmat.shape}")
            if not np.allclose(cmat, cmat.T):
                raise ConfigError("c must be symmetric")
        cmat = cmat.copy()
        np.fill_diagonal(cmat, 0.0)
        if not (np.all(np.isfinite(bvec)) and np.all(np.isfinite(cmat))):
            raise ConfigError("coupling constants must be finite")
        return cls("general", n, ((0.0, 0.0, 0.0),), tuple((float(v),) for v in bvec),
                   tuple(tuple(map(float, row)) for row in cmat), ())

    @property
    def centers(self) -> np.ndarray:
        return np.asarray(self.nuclei, dtype=float)

    @property
    def is_interacting(self) -> bool:
        return any(self.pair[i][j] != 0.0 for i in range(self.n_electrons) for j in range(i + 1, self.n_electrons))

    @property
    def Z(self) -> float:
        """Largest single-electron Coulomb coupling, the Z entering the explicit constants."""
        return max(sum(abs(v) for v in row) for row in self.one_body)

    @property
    def max_pair(self) -> float:
        n = self.n_electrons
        vals = [abs(self.pair[i][j]) for i in range(n) for j in range(i + 1, n)]
        return max(vals, default=0.0)

    def one_body_terms(self) -> list[tuple[int, int, float]]:
        """Non-zero (electron, centre, b) triples; electron labels 1-based, centres 0-based."""
        return [(j + 1, k, b) for j, row in enumerate(self.one_body) for k, b in enumerate(row) if b != 0.0]

    def pair_terms(self) -> list[tuple[int, int, float]]:
        n = self.n_electrons
        return [(i + 1, j + 1, self.pair[i][j]) for i in range(n) for j in range(i + 1, n)
                if self.pair[i][j] != 0.0]


def _positive(v, what: str) -> float:
    try:
        f = float(v)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{what} must be a real number, got {v!r}") from exc
    if not (math.isfinite(f) and f > 0):
        raise ConfigError(f"{what} must be positive and finite, got {v!r}")
    return f


def _electron_count(n) -> int:
    if int(n) != n or n < 1:
        raise ConfigError(f"electron count must be an integer >= 1, got {n!r}")
    return int(n)


def potential_value(spec: PotentialSpec, x) -> float | np.ndarray:
    """V(x) for one configuration (N, 3) or a batch (B, N, 3)."""
    xb, single = as_batch(x)
    if xb.shape[1] != spec.n_electrons:
        raise ConfigError(f"configuration has {xb.shape[1]} electrons, spec has {spec.n_electrons}")
    centers = spec.centers
    total = np.zeros(xb.shape[0])
    for j, k, b in spec.one_body_terms():
        r = np.linalg.norm(xb[:, j - 1] - centers[k], axis=-1)
        if np.any(r == 0.0):
            raise SingularEvaluation(f"electron {j} sits on centre {k + 1}")
        total += b / r
    for i, j, c in spec.pair_terms():
        r = np.linalg.norm(xb[:, i - 1] - xb[:, j - 1], axis=-1)
        if np.any(r == 0.0):
            raise SingularEvaluation(f"electrons {i} and {j} coincide")
        total += c / r
    return float(total[0]) if single else total
