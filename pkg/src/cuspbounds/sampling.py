"""Point samplers (uniform balls, pseudo- and quasi-random) and empirical sup estimates."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.special import ndtri
from scipy.stats import qmc

__all__ = ["BallSampler", "SupEstimate", "empirical_sup", "unit_ball_volume"]


def unit_ball_volume(dim: int) -> float:
    from scipy.special import gamma

    return float(np.pi ** (dim / 2) / gamma(dim / 2 + 1))


class BallSampler:
    """Uniform points in the ball B(center, radius) of R^dim.

    With ``quasi=True`` a scrambled Sobol sequence in dim+1 variables is
    mapped to the ball (Gaussian direction, radius u^(1/dim)); successive
    calls continue the same sequence.
    """

    def __init__(self, dim: int, radius: float = 1.0, center=None, seed=None, quasi: bool = False):
        self.dim = dim
        self.radius = float(radius)
        self.center = np.zeros(dim) if center is None else np.asarray(center, dtype=float).reshape(dim)
        self.rng = np.random.default_rng(seed)
        self.quasi = quasi
        self._sobol = qmc.Sobol(dim + 1, scramble=True, seed=self.rng) if quasi else None

    def draw(self, n: int) -> np.ndarray:
        if self.quasi:
            u = self._sobol.random(n)
            u = np.clip(u, 1e-12, 1 - 1e-12)
            g = ndtri(u[:, : self.dim])
            rad = u[:, self.dim] ** (1.0 / self.dim)
        else:
            g = self.rng.standard_normal((n, self.dim))
            rad = self.rng.random(n) ** (1.0 / self.dim)
        g /= np.linalg.norm(g, axis=1, keepdims=True)
        return self.center + self.radius * rad[:, None] * g


@dataclass
class SupEstimate:
    value: float
    n_samples: int
    stable: bool
    history: list[tuple[int, float]] = field(default_factory=list)
    argmax: np.ndarray | None = None


def empirical_sup(fn: Callable[[np.ndarray], np.ndarray], draw: Callable[[int], np.ndarray],
                  n0: int = 1024, n_max: int = 2**17, rtol: float = 0.01) -> SupEstimate:
    """Running maximum of |fn| over sample batches, doubling until it moves by < rtol.

    ``fn`` maps a (n, ...) sample batch to n values; ``draw(n)`` supplies the
    next n points. The total sample count doubles each round.
    """
    total = 0
    best = -np.inf
    arg = None
    history: list[tuple[int, float]] = []
    n = n0
    prev = None
    while True:
        pts = draw(n)
        vals = np.abs(np.asarray(fn(pts)))
        i = int(np.argmax(vals))
        if vals[i] > best:
            best = float(vals[i])
            arg = pts[i]
        total += n
        history.append((total, best))
        if prev is not None and abs(best - prev) <= rtol * max(abs(prev), 1e-300):
            return SupEstimate(best, total, True, history, arg)
        if total >= n_max:
            return SupEstimate(best, total, False, history, arg)
        prev = best
        n = total
