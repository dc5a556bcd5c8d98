import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from cuspbounds.sampling import BallSampler, empirical_sup, unit_ball_volume


@pytest.mark.parametrize("dim, vol", [(1, 2.0), (2, math.pi), (3, 4 * math.pi / 3), (6, math.pi**3 / 6)])
def test_unit_ball_volume(dim, vol):
    assert unit_ball_volume(dim) == pytest.approx(vol, rel=1e-14)


@given(st.integers(1, 9), st.floats(0.01, 10), st.booleans(), st.integers(0, 10**6))
def test_samples_lie_in_ball(dim, radius, quasi, seed):
    center = np.random.default_rng(seed).normal(size=dim)
    pts = BallSampler(dim, radius, center, seed=seed, quasi=quasi).draw(256)
    assert pts.shape == (256, dim)
    assert np.all(np.linalg.norm(pts - center, axis=1) <= radius * (1 + 1e-12))


@pytest.mark.parametrize("quasi", [False, True])
def test_radius_distribution_is_uniform_in_volume(quasi):
    # For the uniform ball in R^d, (|x|/R)^d is uniform on [0, 1].
    dim = 6
    pts = BallSampler(dim, 2.0, seed=5, quasi=quasi).draw(2**14)
    u = (np.linalg.norm(pts, axis=1) / 2.0) ** dim
    assert abs(u.mean() - 0.5) < 0.01
    assert abs(np.mean(pts[:, 0])) < 0.02


def test_sampler_is_seeded():
    a = BallSampler(3, seed=11).draw(10)
    b = BallSampler(3, seed=11).draw(10)
    assert np.array_equal(a, b)


def test_empirical_sup_converges_for_smooth_function():
    sampler = BallSampler(3, 1.0, seed=0, quasi=True)
    est = empirical_sup(lambda p: 1 - np.sum(p**2, axis=1), sampler.draw)
    assert est.stable
    assert 0.99 <= est.value <= 1.0
    assert est.history[-1][0] == est.n_samples


def test_empirical_sup_reports_unstable():
    calls = []

    def draw(n):
        # each batch reaches further out, so the running max never settles
        calls.append(n)
        return np.full((n, 1), float(len(calls)))

    est = empirical_sup(lambda p: p[:, 0], draw, n0=16, n_max=256, rtol=1e-6)
    assert not est.stable
    assert est.n_samples >= 256
