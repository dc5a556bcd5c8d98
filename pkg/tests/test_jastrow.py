import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from conftest import off_sigma_points
from cuspbounds.calculus import jet as J
from cuspbounds.calculus.derivatives import coords_of, evaluate, gradient, laplacian, partial_alpha
from cuspbounds.config import ClusterSet, MultiIndex, PotentialSpec, potential_value
from cuspbounds.errors import ConfigError, InvalidVariant, OnSingularSet
from cuspbounds.jastrow import (
    AlphaVariant,
    ClusterVariant,
    TildeVariant,
    build_system,
    regularized_residual,
    rescaled_coefficients,
    rescaled_potential_bound,
    smoothing_laplacian,
    vanishing_derivative_check,
    vanishing_sweep,
)
from cuspbounds.oracles import hydrogen_ground, product_state

HELIUM = PotentialSpec.atomic(2.0, 2)
LITHIUM = PotentialSpec.atomic(3.0, 3)


def _alpha(n, electron, a3):
    entries = [0] * (3 * n)
    entries[3 * (electron - 1): 3 * electron] = a3
    return MultiIndex(tuple(entries))


def _terms(ts):
    return sorted((t.pair, t.a, t.b) for t in ts)


# --- construction ----------------------------------------------------------------

def test_tilde_exponent_at_origin():
    sys_ = build_system(TildeVariant(), PotentialSpec.atomic(1.0, 1), E=-0.25)
    assert evaluate(sys_.F, [[0.0, 0, 0]]) == pytest.approx(0.5, abs=1e-15)


def test_exponent_matches_hand_formula(rng):
    sys_ = build_system(TildeVariant(), HELIUM)
    x = rng.normal(size=(2, 3))
    r1, r2, r12 = np.linalg.norm(x[0]), np.linalg.norm(x[1]), np.linalg.norm(x[0] - x[1])
    prof = lambda r: r - math.sqrt(r * r + 1)
    expect = -1.0 * (prof(r1) + prof(r2)) + 0.25 * prof(r12)
    assert evaluate(sys_.F, x) == pytest.approx(expect, rel=1e-14)


def test_alpha_variant_term_selection():
    sys_ = build_system(AlphaVariant(_alpha(3, 1, (1, 0, 0))), LITHIUM)
    assert _terms(sys_.singular) == [(False, 1, 0), (True, 1, 2), (True, 1, 3)]
    assert _terms(sys_.absorbed) == [(False, 2, 0), (False, 3, 0), (True, 2, 3)]


def test_cluster_variant_term_selection():
    sys_ = build_system(ClusterVariant(ClusterSet([1, 2], 3)), LITHIUM)
    assert _terms(sys_.singular) == [(False, 1, 0), (False, 2, 0), (True, 1, 3), (True, 2, 3)]
    assert _terms(sys_.absorbed) == [(False, 3, 0), (True, 1, 2)]


def test_tilde_absorbs_everything(rng):
    sys_ = build_system(TildeVariant(), LITHIUM, E=-7.0)
    assert sys_.singular == [] and len(sys_.absorbed) == 6
    x = off_sigma_points(rng, 5, 3)
    assert np.allclose(evaluate(sys_.V, x), potential_value(LITHIUM, x), rtol=1e-14)


def test_invalid_variants():
    with pytest.raises(InvalidVariant):
        AlphaVariant((0, 0, 0))
    with pytest.raises(ConfigError):
        build_system(AlphaVariant(_alpha(2, 1, (1, 0, 0))), LITHIUM)
    with pytest.raises(ConfigError):
        build_system(ClusterVariant(ClusterSet([1], 2)), LITHIUM)


# --- field identities ---------------------------------------------------------------

@given(st.floats(0.0, 1e6))
def test_smoothing_laplacian_is_bounded(s):
    v = smoothing_laplacian(s)
    assert 0 < v <= 3.0 + 1e-12


def test_smoothing_laplacian_matches_jets():
    u = np.array([[0.3, -0.7, 1.1]])
    direct = laplacian(lambda c: J.sqrt(J.sqnorm3(c[0]) + 1.0), u)
    assert direct == pytest.approx(smoothing_laplacian(float(np.sum(u**2))), rel=1e-13)


@pytest.mark.parametrize("variant", [TildeVariant(), AlphaVariant(_alpha(3, 2, (0, 1, 1))),
                                     ClusterVariant(ClusterSet([1, 3], 3))])
def test_G_is_potential_remainder(variant, rng):
    # the absorbed 1/|u| terms cancel: G = V - V_part - Delta F
    sys_ = build_system(variant, LITHIUM)
    x = off_sigma_points(rng, 20, 3, min_dist=0.1)
    lhs = evaluate(sys_.G, x)
    rhs = evaluate(sys_.V, x) - evaluate(sys_.V_part, x) - laplacian(sys_.F, x)
    assert np.max(np.abs(lhs - rhs)) <= 1e-9 * (1 + np.max(np.abs(rhs)))


def test_grad_F_matches_jets(rng):
    sys_ = build_system(ClusterVariant(ClusterSet([2], 3)), LITHIUM)
    x = off_sigma_points(rng, 10, 3)
    g = sys_.grad_F(coords_of(x))
    analytic = np.moveaxis(np.array([[np.broadcast_to(c, (10,)) for c in row] for row in g]), -1, 0)
    assert np.allclose(analytic, gradient(sys_.F, x), rtol=1e-12, atol=1e-14)


def test_K_is_bounded_for_tilde(rng):
    sys_ = build_system(TildeVariant(), HELIUM, E=-2.9)
    x = rng.normal(scale=3.0, size=(2000, 2, 3))
    k = evaluate(sys_.K, x)
    assert np.all(np.isfinite(k)) and np.max(np.abs(k)) < 50


# --- vanishing derivatives ---------------------------------------------------------------

@pytest.mark.parametrize("a3, beta3", [((1, 0, 0), (1, 0, 0)), ((2, 1, 0), (1, 1, 0)), ((0, 0, 3), (0, 0, 2))])
def test_alpha_variant_derivatives_vanish(a3, beta3, rng):
    alpha = _alpha(3, 1, a3)
    sys_ = build_system(AlphaVariant(alpha), LITHIUM)
    x = off_sigma_points(rng, 30, 3)
    assert vanishing_derivative_check(sys_, _alpha(3, 1, beta3), x) <= 1e-10


@pytest.mark.parametrize("members, beta", [([1], (1, 0, 0)), ([1, 2], (0, 2, 1)), ([1, 2, 3], (1, 1, 1))])
def test_cluster_variant_derivatives_vanish(members, beta, rng):
    sys_ = build_system(ClusterVariant(ClusterSet(members, 3)), LITHIUM)
    x = off_sigma_points(rng, 30, 3)
    assert vanishing_derivative_check(sys_, beta, x) <= 1e-10


def test_derivative_outside_alpha_does_not_vanish(rng):
    # control: differentiating in an electron whose terms were absorbed gives O(1) values
    sys_ = build_system(AlphaVariant(_alpha(3, 1, (1, 0, 0))), LITHIUM)
    x = off_sigma_points(rng, 30, 3)
    assert np.max(np.abs(partial_alpha(sys_.F, x, _alpha(3, 2, (1, 0, 0))))) > 0.1
    tilde = build_system(TildeVariant(), LITHIUM)
    assert np.max(np.abs(partial_alpha(tilde.F, x, _alpha(3, 1, (1, 0, 0))))) > 0.1


def test_vanishing_check_rejections(rng):
    x = off_sigma_points(rng, 3, 2)
    with pytest.raises(InvalidVariant):
        vanishing_derivative_check(build_system(TildeVariant(), HELIUM), (1, 0, 0, 0, 0, 0), x)
    sys_ = build_system(AlphaVariant(_alpha(2, 1, (1, 0, 0))), HELIUM)
    with pytest.raises(ConfigError):
        vanishing_derivative_check(sys_, _alpha(2, 1, (0, 1, 0)), x)
    with pytest.raises(ConfigError):
        vanishing_derivative_check(build_system(ClusterVariant(ClusterSet([1], 2)), HELIUM), (0, 0, 0), x)


def test_vanishing_sweep(rng):
    out = vanishing_sweep(HELIUM, off_sigma_points(rng, 10, 2), max_order=2)
    assert out["max"] <= 1e-10
    assert out["alpha_checks"] > 0 and out["cluster_checks"] > 0


# --- transformed equation ---------------------------------------------------------------

def test_hydrogen_residual_at_point():
    h = hydrogen_ground(1.0)
    sys_ = build_system(TildeVariant(), h.spec, E=h.E)
    res, scale = regularized_residual(sys_, h.psi, [[0.5, 0.2, 0.0]], return_scale=True)
    assert res <= 1e-10 * scale


@pytest.mark.parametrize("variant", [TildeVariant(), AlphaVariant(_alpha(2, 1, (1, 0, 0))),
                                     ClusterVariant(ClusterSet([1, 2], 2))])
def test_product_state_residual(variant, pair_mixed, rng):
    sys_ = build_system(variant, pair_mixed.spec, E=pair_mixed.E)
    x = off_sigma_points(rng, 40, 2)
    res, scale = regularized_residual(sys_, pair_mixed.psi, x, return_scale=True)
    assert np.all(res <= 1e-9 * scale)


def test_residual_detects_non_eigenfunction(rng):
    spec = PotentialSpec.atomic(1.0, 1)
    sys_ = build_system(TildeVariant(), spec, E=-0.25)
    wrong = lambda c: J.exp(-J.norm3(c[0]))
    x = off_sigma_points(rng, 20, 1, min_dist=0.2)
    res, scale = regularized_residual(sys_, wrong, x, return_scale=True)
    assert np.all(res > 0.05 * scale)


@pytest.mark.parametrize("variant", [TildeVariant(), AlphaVariant(_alpha(2, 2, (0, 1, 0))),
                                     ClusterVariant(ClusterSet([1], 2))])
def test_transformed_operator_is_conjugated_hamiltonian(variant, rng):
    # for any smooth phi: L_F(e^{-F} phi) = e^{-F} (H - E) phi
    E = -2.5
    sys_ = build_system(variant, HELIUM, E=E)
    phi = lambda c: J.exp(-0.7 * J.norm3(c[0]) - 1.1 * J.norm3(c[1])) * (1.0 + c[0][0] * c[1][2])
    x = off_sigma_points(rng, 25, 2, min_dist=0.1)
    h_phi = -laplacian(phi, x) + (potential_value(HELIUM, x) - E) * evaluate(phi, x)
    expect = np.abs(np.exp(-evaluate(sys_.F, x)) * h_phi)
    got, scale = regularized_residual(sys_, phi, x, return_scale=True)
    assert np.all(np.abs(got - expect) <= 1e-9 * scale)


def test_transform_round_trip(pair_1s, rng):
    sys_ = build_system(TildeVariant(), PotentialSpec.atomic(1.0, 2))
    x = off_sigma_points(rng, 10, 2)
    back = evaluate(sys_.untransform(sys_.transform(pair_1s.psi)), x)
    assert np.allclose(back, pair_1s.value(x), rtol=1e-12)


# --- rescaled coefficients ---------------------------------------------------------------

def test_rescaled_bound_constants():
    assert rescaled_potential_bound((0,) * 6, 0.5, 2, 1.0) == pytest.approx(16 * math.sqrt(2), rel=1e-14)
    assert rescaled_potential_bound((1, 0, 0, 0, 0, 0), 0.5, 2, 1.0) == pytest.approx(256 * math.sqrt(2), rel=1e-14)
    assert rescaled_potential_bound((2, 0, 0, 0, 0, 0), 0.5, 2, 1.0) == pytest.approx(2 * 256 * 16 * math.sqrt(2))
    with pytest.raises(ConfigError):
        rescaled_potential_bound((0,) * 6, 1.0, 2, 1.0)


@pytest.mark.parametrize("gamma", [(0,) * 6, (1, 0, 0, 0, 0, 0), (0, 1, 0, 0, 0, 1)])
def test_rescaled_potential_within_bound(gamma):
    spec = PotentialSpec.atomic(1.0, 2)
    sys_ = build_system(AlphaVariant(_alpha(2, 1, (1, 0, 0))), spec)
    x0 = np.array([[0.3, 0.1, 0.0], [-0.2, 0.5, 0.4]])
    rep = rescaled_coefficients(sys_, x0).bound_report(gamma, R=0.5, seed=1, n_max=2**12)
    assert rep["pass"] and rep["empirical_sup"] > 0


def test_rescaled_K_and_H_derivatives_vanish():
    alpha = _alpha(2, 1, (1, 1, 0))
    sys_ = build_system(AlphaVariant(alpha), HELIUM, E=-2.9)
    fields = rescaled_coefficients(sys_, [[0.6, -0.2, 0.3], [-0.4, 0.7, 0.1]])
    beta = _alpha(2, 1, (1, 0, 0))
    for name in ("K", "H0", "H4"):
        est = fields.derivative_sup(beta, R=0.5, name=name, seed=3, n_max=2**11)
        assert est.value <= 1e-10, name
    assert fields.derivative_sup(_alpha(2, 2, (1, 0, 0)), name="K", seed=3, n_max=2**11).value > 1e-3


def test_rescaled_coefficients_rejections():
    sys_ = build_system(AlphaVariant(_alpha(2, 1, (1, 0, 0))), HELIUM)
    with pytest.raises(OnSingularSet):
        rescaled_coefficients(sys_, [[0.0, 0, 0], [1.0, 0, 0]])
    with pytest.raises(InvalidVariant):
        rescaled_coefficients(build_system(TildeVariant(), HELIUM), [[1.0, 0, 0], [0, 1.0, 0]])
