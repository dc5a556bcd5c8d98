"""Central finite differences with Richardson extrapolation, used as an independent oracle."""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from itertools import product

import numpy as np

from ..config import MultiIndex, PotentialSpec, as_configuration
from ..errors import StepTooLarge
from .derivatives import ScalarField, coords_of

__all__ = ["FDEstimate", "central_weights", "fd_cross_check"]

EPS = np.finfo(float).eps


@dataclass(frozen=True)
class FDEstimate:
    value: float
    error: float
    steps: tuple[float, float, float]
    raw: tuple[float, float, float]

    def agrees_with(self, other: float, slack: float = 1.0) -> bool:
        return abs(self.value - other) <= slack * self.error


@lru_cache(maxsize=None)
def central_weights(order: int) -> tuple[tuple[int, ...], tuple[float, ...]]:
    """Second-order accurate symmetric stencil (offsets, weights) for d^order/dx^order."""
    if order == 0:
        return (0,), (1.0,)
    p = (order + 1) // 2
    offsets = np.arange(-p, p + 1)
    vander = np.vander(offsets.astype(float), increasing=True).T
    rhs = np.zeros(offsets.size)
    rhs[order] = float(np.prod(np.arange(1, order + 1)))
    w = np.linalg.solve(vander, rhs)
    return tuple(int(o) for o in offsets), tuple(float(v) for v in w)


def _stencil(f: ScalarField, x: np.ndarray, alpha: MultiIndex, h: float) -> tuple[float, float, float]:
    active = [(i, e) for i, e in enumerate(alpha.entries) if e > 0]
    stencils = [central_weights(e) for _, e in active]
    pts = []
    wts = []
    for combo in product(*[range(len(s[0])) for s in stencils]):
        y = x.copy().reshape(-1)
        w = 1.0
        for (flat, _), (offs, ws), c in zip(active, stencils, combo):
            y[flat] += offs[c] * h
            w *= ws[c]
        pts.append(y.reshape(x.shape))
        wts.append(w)
    vals = np.asarray(f(coords_of(np.array(pts))), dtype=float)
    vals = np.broadcast_to(vals, (len(pts),))
    return float(np.dot(wts, vals)) / h**alpha.order, float(np.max(np.abs(vals))), float(np.sum(np.abs(wts)))


def fd_cross_check(f: ScalarField, x, alpha, h0: float = 0.05, *, spec: PotentialSpec | None = None,
                   check_singular: bool = True) -> FDEstimate:
    """Estimate d^alpha f(x) by central differences at steps h0, h0/2, h0/4.

    Two Richardson sweeps remove the h^2 and h^4 error terms. The error bar
    is the gap between the last two extrapolation levels plus a rounding
    estimate at the finest step.
    """
    xc = as_configuration(x)
    a = MultiIndex.coerce(alpha, xc.shape[0])
    if a.order == 0:
        v = float(np.asarray(f(coords_of(xc[None])), dtype=float).reshape(-1)[0])
        return FDEstimate(v, 0.0, (0.0, 0.0, 0.0), (v, v, v))
    if check_singular:
        from ..geometry import dist_to_sigma

        reach = h0 * np.sqrt(sum(((e + 1) // 2) ** 2 for e in a.entries))
        if dist_to_sigma(xc, spec) <= reach:
            raise StepTooLarge(f"stencil radius {reach:.3g} reaches the coalescence set at distance "
                               f"{dist_to_sigma(xc, spec):.3g}")
    steps = (h0, h0 / 2, h0 / 4)
    raw = []
    fmax = 0.0
    wsum = 1.0
    for h in steps:
        d, m, w = _stencil(f, xc, a, h)
        raw.append(d)
        fmax = max(fmax, m)
        wsum = w
    r1a = (4 * raw[1] - raw[0]) / 3
    r1b = (4 * raw[2] - raw[1]) / 3
    r2 = (16 * r1b - r1a) / 15
    rounding = 10 * EPS * fmax * wsum / steps[2] ** a.order
    return FDEstimate(float(r2), float(abs(r2 - r1b) + rounding), steps, tuple(raw))
