"""Exact partial and cluster derivatives of scalar fields via jets.

A scalar field is any callable ``f(coords)`` where ``coords`` is a list of N
electron positions, each a length-3 sequence of numpy arrays or jets. Fields
written with :mod:`cuspbounds.calculus.jet` helpers are jet-liftable.
"""

from __future__ import annotations

import math
from typing import Callable, Sequence

import numpy as np

from ..config import ClusterSet, MultiIndex, as_batch
from ..errors import ConfigError
from .jet import MAX_ORDER, Jet
from ..errors import OrderTooHigh

ScalarField = Callable[[list], object]

__all__ = [
    "ScalarField",
    "coords_of",
    "evaluate",
    "jet_along",
    "partial_alpha",
    "partial_all",
    "cluster_partial",
    "cluster_directions",
    "gradient",
    "value_grad_laplacian",
    "laplacian",
]


def coords_of(xb: np.ndarray) -> list:
    """Split a (B, N, 3) batch into the nested coordinate list fields expect."""
    return [[xb[:, k, s] for s in range(3)] for k in range(xb.shape[1])]


def _result(val, batch: int, single: bool):
    val = np.broadcast_to(np.asarray(val), (batch,))
    return val[0].item() if single else np.array(val)


def evaluate(f: ScalarField, x):
    """Plain evaluation of ``f`` at one configuration or a batch."""
    xb, single = as_batch(x)
    return _result(f(coords_of(xb)), xb.shape[0], single)


def jet_along(f: ScalarField, x, directions: np.ndarray, order: int) -> Jet:
    """Jet of t -> f(x + sum_i t_i v_i) with directions v_i of shape (d, N, 3)."""
    if order > MAX_ORDER:
        raise OrderTooHigh(f"requested order {order} exceeds {MAX_ORDER}")
    xb, _ = as_batch(x)
    v = np.asarray(directions, dtype=float)
    if v.ndim == 2:
        v = v[None]
    if v.shape[1:] != xb.shape[1:]:
        raise ConfigError(f"direction shape {v.shape[1:]} does not match configuration {xb.shape[1:]}")
    d = v.shape[0]
    coords = []
    for k in range(xb.shape[1]):
        row = []
        for s in range(3):
            slopes = v[:, k, s]
            base = xb[:, k, s]
            row.append(Jet.linear(base, slopes, order) if np.any(slopes) else base)
        coords.append(row)
    out = f(coords)
    if not isinstance(out, Jet):
        out = Jet.constant(np.broadcast_to(np.asarray(out), (xb.shape[0],)), d, order)
    if out.batch_shape != (xb.shape[0],):
        out = Jet(np.broadcast_to(out.coef, out.coef.shape[:1] + (xb.shape[0],)).copy(), d, order)
    return out


def _unit_directions(n_electrons: int, flat: Sequence[int]) -> np.ndarray:
    v = np.zeros((len(flat), n_electrons, 3))
    for i, f in enumerate(flat):
        v[i, f // 3, f % 3] = 1.0
    return v


def partial_alpha(f: ScalarField, x, alpha):
    """d^alpha f(x), exact up to rounding, using a jet over supp(alpha) only."""
    xb, single = as_batch(x)
    a = MultiIndex.coerce(alpha, xb.shape[1])
    active = [i for i, e in enumerate(a.entries) if e > 0]
    if not active:
        return evaluate(f, x)
    jet = jet_along(f, xb, _unit_directions(xb.shape[1], active), a.order)
    val = jet.derivative([a.entries[i] for i in active])
    return _result(val, xb.shape[0], single)


def partial_all(f: ScalarField, x, alpha) -> dict[MultiIndex, np.ndarray]:
    """All d^beta f for 0 <= beta <= alpha from a single jet evaluation."""
    xb, _ = as_batch(x)
    a = MultiIndex.coerce(alpha, xb.shape[1])
    active = [i for i, e in enumerate(a.entries) if e > 0]
    jet = jet_along(f, xb, _unit_directions(xb.shape[1], active), a.order)
    out = {}
    for beta in a.sub_indices(include_zero=True):
        out[beta] = jet.derivative([beta.entries[i] for i in active])
    return out


def cluster_directions(q: ClusterSet) -> np.ndarray:
    """The three unit directions e_s/sqrt(|Q|) on every electron of Q, shape (3, N, 3)."""
    v = np.zeros((3, q.n_electrons, 3))
    w = 1.0 / math.sqrt(len(q))
    for j in q.members:
        for s in range(3):
            v[s, j - 1, s] = w
    return v


def cluster_partial(f: ScalarField, x, q: ClusterSet, alpha: Sequence[int]):
    """Cluster derivative: iterate the collective translation derivatives of Q."""
    xb, single = as_batch(x)
    a = tuple(int(v) for v in alpha)
    if len(a) != 3 or any(v < 0 for v in a):
        raise ConfigError(f"cluster multi-index must be 3 non-negative ints, got {alpha!r}")
    if q.n_electrons != xb.shape[1]:
        raise ConfigError(f"cluster is for {q.n_electrons} electrons, configuration has {xb.shape[1]}")
    if sum(a) == 0:
        return evaluate(f, x)
    jet = jet_along(f, xb, cluster_directions(q), sum(a))
    return _result(jet.derivative(a), xb.shape[0], single)


def gradient(f: ScalarField, x) -> np.ndarray:
    """Gradient with shape (N, 3) for a single point or (B, N, 3) for a batch."""
    _, g, _ = value_grad_laplacian(f, x, order=1)
    return g


def value_grad_laplacian(f: ScalarField, x, order: int = 2):
    """(f, grad f, Laplacian f) from 3N univariate jets of the given order."""
    xb, single = as_batch(x)
    b, n = xb.shape[0], xb.shape[1]
    grad = None
    lap = None
    val = None
    for k in range(n):
        for s in range(3):
            v = np.zeros((1, n, 3))
            v[0, k, s] = 1.0
            jet = jet_along(f, xb, v, order)
            if grad is None:
                dtype = jet.coef.dtype
                grad = np.zeros((b, n, 3), dtype=dtype)
                lap = np.zeros(b, dtype=dtype)
                val = jet.value.copy()
            grad[:, k, s] = jet.coef[1]
            if order >= 2:
                lap = lap + 2.0 * jet.coef[2]
    if single:
        return val[0], grad[0], (lap[0] if order >= 2 else None)
    return val, grad, (lap if order >= 2 else None)


def laplacian(f: ScalarField, x):
    return value_grad_laplacian(f, x)[2]
