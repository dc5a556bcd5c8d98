"""Dense truncated multivariate Taylor series ("jets") over a batch of base points.

A jet in ``nvar`` variables truncated at ``order`` stores the normalized
coefficients c_beta = d^beta f / beta! for every |beta| <= order, with shape
(ncoef, *batch). Arithmetic on jets propagates exact derivatives through
compositions, so any field written with the helpers in this module can be
differentiated to high order by evaluating it once on jet inputs.

The module-level functions (``sqrt``, ``exp``, ``norm3`` ...) accept either
jets or plain numpy values, so the same field code serves plain evaluation.
"""

from __future__ import annotations

import math
from typing import Callable, Sequence

import numpy as np

from .. import _kernels
from ..errors import NonSmoothPoint, OrderTooHigh

MAX_ORDER = 8
ABS_TOL = 1e-12

__all__ = [
    "Jet",
    "MAX_ORDER",
    "sqrt",
    "exp",
    "log",
    "recip",
    "power",
    "compose",
    "norm3",
    "sqnorm3",
    "sub3",
    "dot3",
    "value_of",
    "is_jet",
]


class Jet:
    """Truncated Taylor series with coefficient table ``coef`` of shape (ncoef, *batch)."""

    __slots__ = ("coef", "nvar", "order")
    __array_ufunc__ = None  # make numpy defer to the reflected operators

    def __init__(self, coef: np.ndarray, nvar: int, order: int):
        if order > MAX_ORDER:
            raise OrderTooHigh(f"jet order {order} exceeds the supported maximum {MAX_ORDER}")
        self.coef = coef
        self.nvar = nvar
        self.order = order

    # -- construction -----------------------------------------------------

    @classmethod
    def constant(cls, value, nvar: int, order: int) -> "Jet":
        value = np.asarray(value)
        plan = _kernels.product_plan(nvar, order)
        coef = np.zeros((plan.size,) + value.shape, dtype=np.result_type(value, float))
        coef[0] = value
        return cls(coef, nvar, order)

    @classmethod
    def linear(cls, value, slopes: Sequence[float], order: int) -> "Jet":
        """value + sum_i slopes[i] * t_i."""
        nvar = len(slopes)
        out = cls.constant(value, nvar, order)
        if order >= 1:
            for i, s in enumerate(slopes):
                out.coef[1 + i] = s
        return out

    @classmethod
    def variable(cls, value, direction: int, nvar: int, order: int) -> "Jet":
        slopes = [0.0] * nvar
        slopes[direction] = 1.0
        return cls.linear(value, slopes, order)

    # -- inspection -------------------------------------------------------

    @property
    def plan(self) -> _kernels.ProductPlan:
        return _kernels.product_plan(self.nvar, self.order)

    @property
    def value(self) -> np.ndarray:
        return self.coef[0]

    @property
    def batch_shape(self) -> tuple[int, ...]:
        return self.coef.shape[1:]

    def coefficient(self, beta: Sequence[int]) -> np.ndarray:
        beta = tuple(int(b) for b in beta)
        if len(beta) != self.nvar:
            raise ValueError(f"multi-index {beta} has wrong length for {self.nvar} variables")
        if sum(beta) > self.order:
            raise OrderTooHigh(f"coefficient {beta} exceeds jet order {self.order}")
        return self.coef[self.plan.index[beta]]

    def derivative(self, beta: Sequence[int]) -> np.ndarray:
        """d^beta f at the base point (coefficient times beta!)."""
        return self.coefficient(beta) * math.prod(math.factorial(int(b)) for b in beta)

    def derivatives(self) -> np.ndarray:
        """All derivatives, shape (ncoef, *batch), ordered like ``plan.monomials``."""
        f = self.plan.factorials.reshape((-1,) + (1,) * (self.coef.ndim - 1))
        return self.coef * f

    def is_constant(self) -> bool:
        return not np.any(self.coef[1:])

    def __repr__(self) -> str:
        return f"Jet(nvar={self.nvar}, order={self.order}, batch={self.batch_shape})"

    # -- arithmetic ---------------------------------------------------------

    def _coerce(self, other) -> "Jet | None":
        if isinstance(other, Jet):
            if other.nvar != self.nvar or other.order != self.order:
                raise ValueError("cannot combine jets with different variable counts or orders")
            return other
        return None

    def _with(self, coef: np.ndarray) -> "Jet":
        return Jet(coef, self.nvar, self.order)

    def __add__(self, other):
        o = self._coerce(other)
        if o is not None:
            return self._with(self.coef + o.coef)
        other = np.asarray(other)
        batch = np.broadcast_shapes(self.batch_shape, other.shape)
        coef = np.array(np.broadcast_to(self.coef, self.coef.shape[:1] + batch),
                        dtype=np.result_type(self.coef, other))
        coef[0] += other
        return self._with(coef)

    __radd__ = __add__

    def __neg__(self):
        return self._with(-self.coef)

    def __pos__(self):
        return self

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        o = self._coerce(other)
        if o is None:
            return self._with(self.coef * np.asarray(other))
        if self.is_constant():
            return o._with(o.coef * self.coef[0])
        if o.is_constant():
            return self._with(self.coef * o.coef[0])
        return self._with(_kernels.truncated_product(self.coef, o.coef, self.plan))

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Jet):
            return self * recip(other)
        return self._with(self.coef / np.asarray(other))

    def __rtruediv__(self, other):
        return recip(self) * other

    def __pow__(self, p):
        if isinstance(p, (int, np.integer)) and p >= 0:
            if p == 0:
                return Jet.constant(np.ones_like(self.value), self.nvar, self.order)
            out = self
            for _ in range(int(p) - 1):
                out = out * self
            return out
        return power(self, p)


def is_jet(u) -> bool:
    return isinstance(u, Jet)


def value_of(u):
    return u.value if isinstance(u, Jet) else u


def compose(u, derivs: Callable[[np.ndarray, int], np.ndarray], plain: Callable[[np.ndarray], np.ndarray]):
    """Apply a univariate function to a jet from its derivative table.

    ``derivs(u0, m)`` must return f^(n)(u0) for n = 0..m stacked on axis 0.
    """
    if not isinstance(u, Jet):
        return plain(u)
    u0 = u.value
    if u.is_constant():
        return Jet.constant(plain(u0), u.nvar, u.order)
    table = derivs(u0, u.order)
    delta = u._with(u.coef.copy())
    delta.coef[0] = 0
    dtype = np.result_type(table, delta.coef)
    out = np.zeros(np.broadcast_shapes(delta.coef.shape, (1,) + table.shape[1:]), dtype=dtype)
    out[0] = table[0]
    power_ = delta
    for n in range(1, u.order + 1):
        out = out + power_.coef * (table[n] / math.factorial(n))
        if n < u.order:
            power_ = power_ * delta
    return u._with(out)


def _falling(p: float, m: int, u0: np.ndarray) -> np.ndarray:
    """Derivatives of u**p: p (p-1) ... (p-n+1) u^(p-n)."""
    rows = []
    c = 1.0
    for n in range(m + 1):
        rows.append(c * u0 ** (p - n))
        c *= p - n
    return np.array(rows)


def power(u, p: float):
    if isinstance(u, Jet) and not u.is_constant() and np.any(u.value == 0):
        raise NonSmoothPoint(f"power {p} of a jet with zero base value")
    return compose(u, lambda u0, m: _falling(p, m, u0), lambda v: np.power(v, p))


def sqrt(u):
    if isinstance(u, Jet) and not u.is_constant() and np.any(np.real(u.value) <= 0):
        raise NonSmoothPoint("square root of a jet at a non-positive value")
    return compose(u, lambda u0, m: _falling(0.5, m, u0), np.sqrt)


def recip(u):
    if isinstance(u, Jet) and np.any(u.value == 0):
        raise NonSmoothPoint("division by a jet with zero value")
    if not isinstance(u, Jet) and np.any(np.asarray(u) == 0):
        raise NonSmoothPoint("division by zero")
    return compose(u, lambda u0, m: _falling(-1.0, m, u0), lambda v: 1.0 / v)


def exp(u):
    return compose(u, lambda u0, m: np.broadcast_to(np.exp(u0), (m + 1,) + np.shape(u0)), np.exp)


def log(u):
    def derivs(u0, m):
        rows = [np.log(u0)]
        if m >= 1:
            rows.extend(_falling(-1.0, m - 1, u0))
        return np.array(rows)

    if isinstance(u, Jet) and np.any(np.real(u.value) <= 0):
        raise NonSmoothPoint("logarithm of a jet at a non-positive value")
    return compose(u, derivs, np.log)


# ----------------------------------------------------------------------------
# Three-vector helpers; a "vector" is any length-3 sequence of jets or arrays.
# ----------------------------------------------------------------------------

def sub3(a, b):
    return (a[0] - b[0], a[1] - b[1], a[2] - b[2])


def dot3(a, b):
    return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]


def sqnorm3(a):
    return dot3(a, a)


def norm3(a):
    """Euclidean norm; flags NonSmoothPoint when a jet is lifted at |a| < 1e-12."""
    s = sqnorm3(a)
    # Test the components, not s: at order 1 the jet of |u|^2 truncates to a constant at u = 0.
    moving = any(isinstance(c, Jet) and not c.is_constant() for c in a)
    if moving and np.any(np.sqrt(np.abs(value_of(s))) < ABS_TOL):
        raise NonSmoothPoint("|.| lifted at a point where its argument vanishes")
    if isinstance(s, Jet):
        return compose(s, lambda u0, m: _falling(0.5, m, u0), np.sqrt)
    return np.sqrt(s)
