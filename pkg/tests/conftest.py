import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from cuspbounds.oracles import hydrogen_ground, product_state

# Jet evaluation and first-call numba compilation make single examples slow.
settings.register_profile("cusp", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("cusp")


@pytest.fixture(scope="session")
def hydrogen():
    return hydrogen_ground(1.0)


@pytest.fixture(scope="session")
def pair_1s():
    return product_state(["1s", "1s"])


@pytest.fixture(scope="session")
def pair_mixed():
    return product_state(["1s", "2s"])


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


def off_sigma_points(rng, n_points, n_electrons, min_dist=0.05, scale=1.5):
    """Gaussian configurations at distance >= min_dist from every coalescence."""
    from cuspbounds.geometry import dist_to_sigma

    out = []
    while len(out) < n_points:
        x = rng.normal(scale=scale, size=(4 * n_points, n_electrons, 3))
        out.extend(x[dist_to_sigma(x) >= min_dist])
    return np.array(out[:n_points])


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    if mod is not None and getattr(mod, "RESULTS", None):
        terminalreporter.section("acceptance criteria")
        for line in mod.RESULTS:
            terminalreporter.write_line(line)
