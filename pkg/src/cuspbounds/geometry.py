"""Coalescence sets of the Coulomb potential and distances to them.

All distance functions accept a single configuration (N, 3) or a batch
(B, N, 3) and return a float or a (B,) array. With nuclei present the
single-electron terms |x_j| become min_k |x_j - R_k|.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numpy as np

from .config import ClusterSet, MultiIndex, PotentialSpec, as_batch
from .errors import InvalidSelector

SQRT2 = np.sqrt(2.0)

__all__ = [
    "Full",
    "ByAlpha",
    "ByClusterUnion",
    "ParallelCluster",
    "SingularSelector",
    "dist_to_sigma",
    "dist_to_selected",
    "lambda_reg",
    "radial_reg",
]


@dataclass(frozen=True)
class Full:
    """The whole coalescence set."""


@dataclass(frozen=True)
class ByAlpha:
    """Coalescences involving an electron that the multi-index differentiates."""

    alpha: MultiIndex

    def __post_init__(self) -> None:
        a = MultiIndex.coerce(self.alpha)
        if a.order < 1:
            raise InvalidSelector("ByAlpha needs a multi-index of order >= 1")
        object.__setattr__(self, "alpha", a)


@dataclass(frozen=True)
class ByClusterUnion:
    """Union over k in Q of the sets {x_k = 0} and {x_k = x_j}."""

    cluster: ClusterSet


@dataclass(frozen=True)
class ParallelCluster:
    """Coalescences that a simultaneous translation of Q does not preserve.

    Pairs inside Q are excluded: moving the whole cluster keeps x_j - x_k fixed.
    """

    cluster: ClusterSet


SingularSelector = Union[Full, ByAlpha, ByClusterUnion, ParallelCluster]


def _nucleus_dist(xb: np.ndarray, centers: np.ndarray | None) -> np.ndarray:
    """(B, N) array of min_k |x_j - R_k|."""
    if centers is None:
        return np.linalg.norm(xb, axis=-1)
    diff = xb[:, :, None, :] - centers[None, None, :, :]
    return np.linalg.norm(diff, axis=-1).min(axis=-1)


def _pair_dist(xb: np.ndarray) -> np.ndarray:
    """(B, N, N) array of |x_j - x_k|/sqrt(2), +inf on the diagonal."""
    diff = xb[:, :, None, :] - xb[:, None, :, :]
    out = np.linalg.norm(diff, axis=-1) / SQRT2
    n = xb.shape[1]
    out[:, np.arange(n), np.arange(n)] = np.inf
    return out


def _centers(spec: PotentialSpec | None) -> np.ndarray | None:
    if spec is None:
        return None
    c = spec.centers
    if c.shape[0] == 1 and not np.any(c):
        return None
    return c


def _finish(vals: np.ndarray, single: bool):
    return float(vals[0]) if single else vals


def dist_to_sigma(x, spec: PotentialSpec | None = None):
    """d(x, Sigma): min over single-electron distances and pair distances/sqrt(2)."""
    xb, single = as_batch(x)
    one = _nucleus_dist(xb, _centers(spec)).min(axis=-1)
    if xb.shape[1] > 1:
        one = np.minimum(one, _pair_dist(xb).min(axis=(-1, -2)))
    return _finish(one, single)


def _union_dist(xb: np.ndarray, members: list[int], centers) -> np.ndarray:
    idx = np.array(members) - 1
    d = _nucleus_dist(xb, centers)[:, idx].min(axis=-1)
    if xb.shape[1] > 1:
        d = np.minimum(d, _pair_dist(xb)[:, idx, :].min(axis=(-1, -2)))
    return d


def dist_to_selected(x, sel: SingularSelector, spec: PotentialSpec | None = None):
    """Distance to the coalescence subset chosen by ``sel``."""
    xb, single = as_batch(x)
    centers = _centers(spec)
    n = xb.shape[1]
    if isinstance(sel, Full):
        return dist_to_sigma(x, spec)
    if isinstance(sel, ByAlpha):
        if sel.alpha.n_electrons != n:
            raise InvalidSelector(f"multi-index is for {sel.alpha.n_electrons} electrons, configuration has {n}")
        return _finish(_union_dist(xb, sorted(sel.alpha.support), centers), single)
    if isinstance(sel, ByClusterUnion):
        _check_cluster(sel.cluster, n)
        return _finish(_union_dist(xb, sorted(sel.cluster.members), centers), single)
    if isinstance(sel, ParallelCluster):
        _check_cluster(sel.cluster, n)
        inside = np.array(sorted(sel.cluster.members)) - 1
        outside = np.array(sorted(sel.cluster.complement), dtype=int) - 1
        d = _nucleus_dist(xb, centers)[:, inside].min(axis=-1)
        if outside.size:
            d = np.minimum(d, _pair_dist(xb)[:, inside][:, :, outside].min(axis=(-1, -2)))
        return _finish(d, single)
    raise InvalidSelector(f"unknown selector {sel!r}")


def _check_cluster(q: ClusterSet, n: int) -> None:
    if q.n_electrons != n:
        raise InvalidSelector(f"cluster is for {q.n_electrons} electrons, configuration has {n}")


def lambda_reg(d):
    """min(1, d)."""
    if np.ndim(d) == 0:
        if d < 0:
            raise ValueError("distance must be non-negative")
        return min(1.0, float(d))
    d = np.asarray(d, dtype=float)
    if np.any(d < 0):
        raise ValueError("distance must be non-negative")
    return np.minimum(1.0, d)


def radial_reg(x1):
    """min(1, |x1|) for a point (3,) or points (B, 3)."""
    return lambda_reg(np.linalg.norm(np.asarray(x1, dtype=float), axis=-1))
