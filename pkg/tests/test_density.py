import math

import numpy as np
import pytest
import sympy as sp

from cuspbounds.density import (
    ball_integral,
    density,
    density_partial,
    lipschitz_quotients,
    rho_apriori_checks,
    rho_closed,
    rho_far_field,
    rho_partial_closed,
    rho_weighted_lp_scan,
    verify_rho_pointwise,
)
from cuspbounds.errors import CenterAtNucleus, ConfigError, MethodUnavailable
from cuspbounds.oracles import hydrogen_2s, product_state
from cuspbounds.sampling import BallSampler

X1 = np.array([0.7, 0.2, -0.3])


def _schedule(n, seed=0):
    rng = np.random.default_rng(seed)
    v = rng.normal(size=(n, 3))
    return [t * u / np.linalg.norm(u) for t, u in zip(np.logspace(-3, -0.3, n), v)]


# --- closed forms -------------------------------------------------------------------------

def test_hydrogen_density(hydrogen):
    for r in (0.1, 1.0, 3.0):
        x = np.array([0.0, r, 0.0])
        assert density(hydrogen, x, normalize=True).value == pytest.approx(math.exp(-r) / (8 * math.pi), rel=1e-14)
        assert rho_closed(hydrogen, x) == pytest.approx(math.exp(-r), rel=1e-14)


def test_identical_orbitals_double_density(pair_1s):
    x = np.array([0.3, -0.4, 0.5])
    phi2 = math.exp(-np.linalg.norm(x))
    assert density(pair_1s, x, normalize=True).value == pytest.approx(2 * phi2 / (8 * math.pi), rel=1e-14)


def test_total_mass_is_electron_count_times_norm(pair_mixed):
    mass = ball_integral(pair_mixed, np.zeros(3), 80.0, n_nodes=200)
    assert mass == pytest.approx(2 * pair_mixed.norm_sq, rel=1e-8)


def test_ball_integral_against_monte_carlo(pair_mixed):
    c, R = np.array([0.4, 0.0, 0.3]), 0.9
    pts = BallSampler(3, R, c, seed=0).draw(400_000)
    vol = 4 / 3 * math.pi * R**3
    vals = rho_closed(pair_mixed, pts) * vol
    mc, se = vals.mean(), vals.std() / math.sqrt(vals.size)
    assert abs(ball_integral(pair_mixed, c, R) - mc) <= 4 * se
    with pytest.raises(ConfigError):
        ball_integral(pair_mixed, c, 0.0)


def test_hydrogen_gradient_magnitude(hydrogen):
    rng = np.random.default_rng(1)
    for x in rng.normal(size=(5, 3)):
        g = np.array([density_partial(hydrogen, x, e, normalize=True).value for e in np.eye(3, dtype=int)])
        assert np.linalg.norm(g) == pytest.approx(math.exp(-np.linalg.norm(x)) / (8 * math.pi), rel=1e-12)


@pytest.mark.parametrize("t", [1e-1, 1e-3, 1e-5])
def test_transverse_second_derivative_blows_up(hydrogen, t):
    v = density_partial(hydrogen, [t, 0, 0], (0, 2, 0), normalize=True).value
    assert v == pytest.approx(-math.exp(-t) / (8 * math.pi * t), rel=1e-12)


def test_2s_density_derivatives_against_sympy():
    x, y, z = sp.symbols("x y z", real=True)
    r = sp.sqrt(x**2 + y**2 + z**2)
    rho = ((1 - r / 4) * sp.exp(-r / 4)) ** 2
    pt = {x: 0.7, y: 0.2, z: -0.3}
    state = hydrogen_2s(1.0)
    for a in [(1, 0, 0), (0, 2, 0), (1, 1, 1), (0, 0, 3)]:
        expr = sp.diff(rho, x, a[0], y, a[1], z, a[2]) if sum(a) else rho
        assert rho_partial_closed(state, X1, a) == pytest.approx(float(expr.subs(pt)), rel=1e-11)


# --- Monte Carlo and partition routes --------------------------------------------------------

@pytest.mark.parametrize("alpha", [(0, 0, 0), (1, 0, 0), (0, 2, 0), (1, 0, 1)])
def test_mc_route_matches_closed_form(pair_mixed, alpha):
    closed = density_partial(pair_mixed, X1, alpha)
    mc = density_partial(pair_mixed, X1, alpha, "mc", budget=2000, seed=3)
    assert mc.agrees_with(closed), (mc.value, mc.stderr, closed.value)
    assert set(mc.parts) == {1, 2}


@pytest.mark.parametrize("alpha", [(1, 0, 0), (0, 1, 1)])
def test_partition_route_matches_closed_form(alpha):
    state = product_state(["1s", "2s", ("1s", 1.5)])
    closed = density_partial(state, X1, alpha)
    part = density_partial(state, X1, alpha, "partition", budget=3000, seed=4)
    assert part.stderr > 0
    assert part.agrees_with(closed), (part.value, part.stderr, closed.value)


def test_density_route_errors(hydrogen):
    with pytest.raises(CenterAtNucleus):
        density_partial(hydrogen, [0.0, 0, 0], (1, 0, 0))
    with pytest.raises(MethodUnavailable):
        density_partial(hydrogen, X1, (1, 0, 0), "grid")
    with pytest.raises(MethodUnavailable):
        density(hydrogen, X1, "partition")
    with pytest.raises(ConfigError):
        density_partial(hydrogen, X1, (1, 0))
    assert density(hydrogen, [0.0, 0, 0]).value == pytest.approx(1.0)


def test_density_estimate_agreement_floor():
    from cuspbounds.density import DensityEstimate

    a = DensityEstimate(X1, (0, 0, 0), 1.0, 0.0, "closed")
    assert a.agrees_with(1.0 + 1e-11)
    assert not a.agrees_with(1.0 + 1e-8)


# --- regularity checks -----------------------------------------------------------------------

def test_lipschitz(pair_mixed):
    out = lipschitz_quotients(pair_mixed, seed=2)
    assert out["passed"] and out["max_quotient"] > 0


@pytest.mark.parametrize("alpha", [(0, 2, 0), (1, 1, 0), (0, 0, 1)])
def test_pointwise_density_bound(pair_mixed, alpha):
    out = verify_rho_pointwise(pair_mixed, alpha, 0.5, _schedule(16))
    assert out["passed"], out["stats"]
    with pytest.raises(CenterAtNucleus):
        verify_rho_pointwise(pair_mixed, alpha, 0.5, [np.zeros(3)])


def test_far_field(pair_mixed):
    for alpha in [(1, 0, 0), (0, 2, 0), (1, 1, 1)]:
        out = rho_far_field(pair_mixed, alpha, direction=(1.0, 2.0, 3.0))
        assert out["passed"], out
    assert rho_far_field(pair_mixed, (1, 0, 0))["limit"] == pytest.approx(-2 * pair_mixed.decay_rate())


@pytest.mark.parametrize("alpha, p, below, above", [((1, 0, 0), 2.0, 2.0, 3.0), ((0, 2, 0), 1.0, 3.5, 4.5),
                                                   ((0, 2, 0), math.inf, 1.0, 1.5)])
def test_weighted_lp_brackets(hydrogen, alpha, p, below, above):
    out = rho_weighted_lp_scan(hydrogen, alpha, p, [below, above])
    for w in (below, above):
        res = out["results"][w]
        assert res["status"] == res["expected"], (w, res["status"], res["q"])
    assert out["results"][below]["expected"] == "CONVERGENT"
    assert out["results"][above]["expected"] == "DIVERGENT"


def test_weighted_lp_scan_errors(hydrogen):
    with pytest.raises(ConfigError):
        rho_weighted_lp_scan(hydrogen, (0, 0, 0), 2.0, [1.0])
    with pytest.raises(ConfigError):
        rho_weighted_lp_scan(hydrogen, (1, 0, 0), 0.5, [1.0])


def test_apriori_checks(pair_1s, hydrogen):
    out = rho_apriori_checks(pair_1s, _schedule(8, seed=1), b=2.0, n_outer=200, n_inner=16, n_moment=5000)
    assert out["passed"], out["checks"]
    assert set(out["checks"]) == {"sup_psi", "sup_grad", "rho", "grad_rho", "coulomb"}
    single = rho_apriori_checks(hydrogen, _schedule(6), n_inner=16)
    assert "coulomb" not in single["checks"] and single["notices"]
    with pytest.raises(ConfigError):
        rho_apriori_checks(pair_1s, _schedule(3), b=3.0)
    with pytest.raises(ConfigError):
        rho_apriori_checks(pair_1s, _schedule(3), r=0.5, R=0.25)


def test_coulomb_moment_matches_closed_form(pair_1s):
    # int |x_2|^{-2} e^{-|x_2|} d x_2 = 4 pi, so the moment is e^{-|x_1|} * 4 pi
    x1 = np.array([0.3, 0.0, 0.4])
    out = rho_apriori_checks(pair_1s, [x1], b=2.0, n_outer=50, n_inner=4, n_moment=20_000)
    row = out["rows"][0]
    assert abs(row["coulomb"] - 4 * math.pi * math.exp(-0.5)) <= 4 * row["coulomb_err"] + 1e-12
