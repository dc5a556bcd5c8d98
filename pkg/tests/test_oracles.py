import math

import numpy as np
import pytest
import sympy as sp
from hypothesis import given, strategies as st

from conftest import off_sigma_points
from cuspbounds.calculus.derivatives import cluster_partial, gradient, partial_alpha
from cuspbounds.config import ClusterSet, PotentialSpec
from cuspbounds.errors import ConfigError, NonSmoothPoint
from cuspbounds.oracles import (
    Orbital,
    eigen_residual,
    exact_cluster_partial,
    exact_gradient,
    exact_partial,
    hydrogen_2s,
    hydrogen_ground,
    product_state,
)

r_, Z_ = sp.symbols("r Z", positive=True)
PROFILES = {"1s": sp.exp(-Z_ * r_ / 2), "2s": (1 - Z_ * r_ / 4) * sp.exp(-Z_ * r_ / 4)}


def _radial_moment(kind, Z, k):
    g = PROFILES[kind].subs(Z_, Z)
    return float(sp.integrate(4 * sp.pi * r_ ** (2 + k) * g**2, (r_, 0, sp.oo)))


def _symbolic_energy(kind):
    g = PROFILES[kind]
    lap = sp.diff(r_**2 * sp.diff(g, r_), r_) / r_**2
    return sp.simplify((-lap - Z_ / r_ * g) / g)


def test_hydrogen_value_and_energies():
    h = hydrogen_ground(1.0)
    assert h.value([[1.0, 0, 0]]) == pytest.approx(math.exp(-0.5), rel=1e-15)
    assert h.E == pytest.approx(-0.25, abs=1e-14)
    assert hydrogen_ground(2.0).E == pytest.approx(-1.0, abs=1e-14)


@pytest.mark.parametrize("kind", ["1s", "2s"])
@pytest.mark.parametrize("Z", [1.0, 2.0, 3.5])
def test_orbital_energy_matches_symbolic(kind, Z):
    expect = float(_symbolic_energy(kind).subs(Z_, Z))
    assert Orbital.build(kind, Z).energy == pytest.approx(expect, rel=1e-13)


@pytest.mark.parametrize("kind", ["1s", "2s"])
@pytest.mark.parametrize("Z", [1.0, 2.0])
def test_orbital_norms(kind, Z):
    assert Orbital.build(kind, Z).norm_sq == pytest.approx(_radial_moment(kind, Z, 0), rel=1e-13)


def test_product_examples():
    st2 = product_state(["1s", "1s"])
    assert st2.E == pytest.approx(-0.5)
    assert st2.value([[1, 0, 0], [0, 1, 0]]) == pytest.approx(math.exp(-1.0), rel=1e-15)
    assert product_state(["1s"], 3).E == pytest.approx(-0.75)
    assert st2.spec.kind == "general" and not st2.spec.is_interacting


def test_product_refuses_interacting_spec():
    with pytest.raises(ConfigError):
        product_state(["1s", "1s"], spec=PotentialSpec.atomic(1.0, 2))
    with pytest.raises(ConfigError):
        product_state(["1s", "1s"], spec=PotentialSpec.general([-2.0, -1.0], 0.0, 2))
    with pytest.raises(ConfigError):
        product_state(["1s", "1s"], 3)
    with pytest.raises(ConfigError):
        Orbital.build("3p", 1.0)


def test_exact_partial_examples(hydrogen, pair_mixed):
    assert exact_partial(hydrogen, [[0.1, 0, 0]], (0, 2, 0)) == pytest.approx(-4.75614712250357, rel=1e-12)
    x = np.array([[0.4, 0.2, -0.1], [0.3, -0.6, 0.9]])
    a2 = (0, 0, 0, 1, 2, 0)
    o1, o2 = pair_mixed.orbitals
    assert exact_partial(pair_mixed, x, a2) == pytest.approx(o1.value(x[0]) * o2.partial(x[1], (1, 2, 0)), rel=1e-14)
    assert exact_partial(pair_mixed, x, (0,) * 6) == pytest.approx(pair_mixed.value(x), rel=1e-15)


def test_exact_partial_rejects_nucleus(hydrogen):
    with pytest.raises(NonSmoothPoint):
        exact_partial(hydrogen, [[0.0, 0, 0]], (1, 0, 0))


@given(st.integers(0, 10**6), st.lists(st.integers(0, 3), min_size=6, max_size=6))
def test_exact_partial_matches_jets(seed, alpha):
    if sum(alpha) > 6:
        return
    state = product_state([("2s", 1.3), ("1s", 0.8)])
    x = np.random.default_rng(seed).normal(size=(2, 3))
    exact = exact_partial(state, x, alpha)
    jet = partial_alpha(state.psi, x, alpha)
    assert jet == pytest.approx(exact, rel=1e-9, abs=1e-12)


def test_exact_gradient_matches_jets(pair_mixed, rng):
    x = rng.normal(size=(8, 2, 3))
    assert np.allclose(exact_gradient(pair_mixed, x), gradient(pair_mixed.psi, x), rtol=1e-12, atol=1e-15)


@pytest.mark.parametrize("members, a3", [([1, 2], (2, 0, 0)), ([1, 2], (1, 1, 1)), ([2], (0, 0, 3)),
                                         ([1, 3], (2, 1, 0))])
def test_exact_cluster_partial_matches_jets(members, a3, rng):
    state = product_state(["1s", "2s", "1s"])
    q = ClusterSet(members, 3)
    x = rng.normal(size=(6, 3, 3))
    assert np.allclose(exact_cluster_partial(state, x, q, a3), cluster_partial(state.psi, x, q, a3),
                       rtol=1e-10, atol=1e-14)


@pytest.mark.parametrize("build", [
    lambda: hydrogen_ground(1.0), lambda: hydrogen_ground(2.0), lambda: hydrogen_2s(1.0),
    lambda: product_state(["1s", "2s"]), lambda: product_state([("1s", 2.0), ("2s", 1.0), ("1s", 1.0)]),
])
def test_eigen_residual(build, rng):
    state = build()
    x = off_sigma_points(rng, 100, state.n_electrons)
    res = eigen_residual(state, x)
    assert np.all(res <= 1e-8 * (1 + np.abs(state.value(x))))


def test_wrong_energy_gives_large_residual(rng):
    from cuspbounds.calculus.derivatives import laplacian
    from cuspbounds.config import potential_value

    h = hydrogen_ground(1.0)
    x = off_sigma_points(rng, 20, 1)
    res = np.abs(-laplacian(h.psi, x) + (potential_value(h.spec, x) + 0.3) * h.value(x))
    assert np.all(res > 1e-3 * h.value(x))


@pytest.mark.parametrize("kind, Z", [("1s", 1.0), ("1s", 2.0), ("2s", 1.0), ("2s", 1.5)])
def test_orbital_sampler_moments(kind, Z):
    o = Orbital.build(kind, Z)
    r = np.linalg.norm(o.sample(np.random.default_rng(7), 200_000), axis=1)
    m0 = _radial_moment(kind, Z, 0)
    assert np.mean(r**2) == pytest.approx(_radial_moment(kind, Z, 2) / m0, rel=0.02)
    assert np.mean(r) == pytest.approx(_radial_moment(kind, Z, 1) / m0, rel=0.01)


def test_state_density_is_normalized_product(pair_mixed):
    x = np.random.default_rng(2).normal(size=(5, 2, 3))
    expect = pair_mixed.value(x) ** 2 / pair_mixed.norm_sq
    assert np.allclose(pair_mixed.density(x), expect, rtol=1e-13)


@pytest.mark.parametrize("build", [lambda: hydrogen_ground(1.0), lambda: product_state(["1s", "2s"])])
def test_monte_carlo_norm_matches_closed_form(build):
    # proposal exp(-|x_j|/3) per electron; heavier-tailed than every orbital density
    state = build()
    n = state.n_electrons
    rng = np.random.default_rng(99)
    m = 10**6
    r = rng.gamma(3.0, 3.0, size=(m, n))
    d = rng.normal(size=(m, n, 3))
    x = d / np.linalg.norm(d, axis=2, keepdims=True) * r[..., None]
    q = np.prod(np.exp(-r / 3) / (8 * np.pi * 27), axis=1)
    w = state.value(x) ** 2 / q
    assert w.mean() == pytest.approx(state.norm_sq, rel=0.01)


def test_decay_witness(pair_1s):
    C0, c0 = pair_1s.decay_witness()
    assert c0 > 0
    # exp(-(|x1| + |x2|)/2) <= exp(-|x|/2), so C0 <= 1 for any c0 <= 1/2
    assert 0.5 < C0 <= 1.0 + 1e-12
