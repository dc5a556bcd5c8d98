"""Hot loops with a numba implementation and a pure-numpy fallback.

Set ``CUSPBOUNDS_DISABLE_NUMBA=1`` to force the numpy path (useful for
debugging and for the benchmark comparison). Both paths produce the same
numbers up to floating-point summation order.
"""

from __future__ import annotations

import math
import os
from functools import lru_cache

import numpy as np

try:
    import numba

    _HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None
    _HAVE_NUMBA = False

ENV_FLAG = "CUSPBOUNDS_DISABLE_NUMBA"


def numba_enabled() -> bool:
    return _HAVE_NUMBA and os.environ.get(ENV_FLAG, "").strip().lower() not in ("1", "true", "yes", "on")


USE_NUMBA = numba_enabled()


# ----------------------------------------------------------------------------
# Monomial tables for dense truncated Taylor series
# ----------------------------------------------------------------------------

class ProductPlan:
    """Index tables for truncated multiplication in ``nvar`` variables up to ``order``."""

    def __init__(self, nvar: int, order: int):
        self.nvar = nvar
        self.order = order
        monos: list[tuple[int, ...]] = []
        for total in range(order + 1):
            monos.extend(_compositions(total, nvar))
        self.monomials = monos
        self.index = {m: i for i, m in enumerate(monos)}
        self.degrees = np.array([sum(m) for m in monos], dtype=np.int64)
        self.factorials = np.array([math.prod(math.factorial(e) for e in m) for m in monos], dtype=float)
        ti, tj, tk = [], [], []
        groups = []
        for i, a in enumerate(monos):
            js, ks = [], []
            for j, b in enumerate(monos):
                if sum(a) + sum(b) > order:
                    continue
                k = self.index[tuple(p + q for p, q in zip(a, b))]
                js.append(j)
                ks.append(k)
            ti.extend([i] * len(js))
            tj.extend(js)
            tk.extend(ks)
            groups.append((i, np.array(js, dtype=np.int64), np.array(ks, dtype=np.int64)))
        self.ti = np.array(ti, dtype=np.int64)
        self.tj = np.array(tj, dtype=np.int64)
        self.tk = np.array(tk, dtype=np.int64)
        self.groups = groups

    @property
    def size(self) -> int:
        return len(self.monomials)


def _compositions(total: int, parts: int):
    """Multi-indices of length ``parts`` summing to ``total``, lexicographically descending."""
    if parts == 0:
        if total == 0:
            yield ()
        return
    if parts == 1:
        yield (total,)
        return
    for first in range(total, -1, -1):
        for rest in _compositions(total - first, parts - 1):
            yield (first,) + rest


@lru_cache(maxsize=None)
def product_plan(nvar: int, order: int) -> ProductPlan:
    return ProductPlan(nvar, order)


# ----------------------------------------------------------------------------
# Truncated product
# ----------------------------------------------------------------------------

def _truncated_product_numpy(a: np.ndarray, b: np.ndarray, plan: ProductPlan) -> np.ndarray:
    shape = np.broadcast_shapes(a.shape, b.shape)
    a = np.broadcast_to(a, shape)
    b = np.broadcast_to(b, shape)
    out = np.zeros(shape, dtype=np.result_type(a, b))
    for i, js, ks in plan.groups:
        ai = a[i]
        if not np.any(ai):
            continue
        out[ks] += ai * b[js]
    return out


if _HAVE_NUMBA:

    @numba.njit(cache=True)
    def _truncated_product_nb(a, b, ti, tj, tk, out):  # pragma: no cover - compiled
        npts = a.shape[1]
        for t in range(ti.shape[0]):
            i = ti[t]
            j = tj[t]
            k = tk[t]
            for p in range(npts):
                out[k, p] += a[i, p] * b[j, p]
        return out


def truncated_product(a: np.ndarray, b: np.ndarray, plan: ProductPlan, use_numba: bool | None = None) -> np.ndarray:
    """Product of two coefficient tables of shape (ncoef, ...) truncated at ``plan.order``."""
    if use_numba is None:
        use_numba = USE_NUMBA
    if not use_numba:
        return _truncated_product_numpy(a, b, plan)
    shape = np.broadcast_shapes(a.shape, b.shape)
    dtype = np.result_type(a, b)
    a2 = np.ascontiguousarray(np.broadcast_to(a, shape), dtype=dtype).reshape(shape[0], -1)
    b2 = np.ascontiguousarray(np.broadcast_to(b, shape), dtype=dtype).reshape(shape[0], -1)
    out = np.zeros_like(a2)
    _truncated_product_nb(a2, b2, plan.ti, plan.tj, plan.tk, out)
    return out.reshape(shape)


# ----------------------------------------------------------------------------
# Polynomial smoothstep and its derivatives
# ----------------------------------------------------------------------------

# s(u) = 35u^4 - 84u^5 + 70u^6 - 20u^7 rises from 0 at u=0 to 1 at u=1.
SMOOTHSTEP = np.array([0.0, 0.0, 0.0, 0.0, 35.0, -84.0, 70.0, -20.0])


@lru_cache(maxsize=None)
def _smoothstep_derivative_table(max_order: int) -> np.ndarray:
    """Row n holds the ascending coefficients of d^n s/du^n, padded to length 8."""
    rows = []
    c = SMOOTHSTEP.copy()
    for _ in range(max_order + 1):
        rows.append(np.pad(c, (0, 8 - c.size)))
        c = np.polynomial.polynomial.polyder(c) if c.size > 1 else np.zeros(1)
    return np.array(rows)


def _cutoff_derivatives_numpy(t: np.ndarray, order: int, lo: float, hi: float) -> np.ndarray:
    table = _smoothstep_derivative_table(order)
    scale = 1.0 / (hi - lo)
    u = (t - lo) * scale
    out = np.zeros((order + 1,) + t.shape)
    inside = (u > 0.0) & (u < 1.0)
    ui = u[inside]
    for n in range(order + 1):
        out[n][inside] = np.polynomial.polynomial.polyval(ui, table[n]) * scale**n
    out[0][u >= 1.0] = 1.0
    return out


if _HAVE_NUMBA:

    @numba.njit(cache=True)
    def _cutoff_derivatives_nb(t, order, lo, hi, table, out):  # pragma: no cover - compiled
        scale = 1.0 / (hi - lo)
        for p in range(t.shape[0]):
            u = (t[p] - lo) * scale
            if u <= 0.0:
                continue
            if u >= 1.0:
                out[0, p] = 1.0
                continue
            sn = 1.0
            for n in range(order + 1):
                acc = 0.0
                for c in range(7, -1, -1):
                    acc = acc * u + table[n, c]
                out[n, p] = acc * sn
                sn *= scale
        return out


def cutoff_derivatives(t, order: int, lo: float = 0.25, hi: float = 0.75, use_numba: bool | None = None) -> np.ndarray:
    """Derivatives 0..order of the rising smoothstep chi_2 at points t.

    chi_2 is 0 for t <= lo, 1 for t >= hi, and s((t - lo)/(hi - lo)) between.
    Returns an array of shape (order + 1,) + t.shape.
    """
    if use_numba is None:
        use_numba = USE_NUMBA
    t = np.asarray(t, dtype=float)
    if not use_numba:
        return _cutoff_derivatives_numpy(t, order, lo, hi)
    flat = np.ascontiguousarray(t.reshape(-1))
    out = np.zeros((order + 1, flat.size))
    _cutoff_derivatives_nb(flat, order, float(lo), float(hi), _smoothstep_derivative_table(order), out)
    return out.reshape((order + 1,) + t.shape)
