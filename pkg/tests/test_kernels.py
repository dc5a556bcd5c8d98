import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, strategies as st

from cuspbounds import _kernels
from cuspbounds.calculus.derivatives import partial_alpha
from cuspbounds.oracles import product_state

needs_numba = pytest.mark.skipif(not _kernels._HAVE_NUMBA, reason="numba not installed")


@needs_numba
@given(st.integers(0, 10**6), st.integers(1, 4), st.integers(0, 6), st.integers(1, 40))
def test_truncated_product_paths_agree(seed, nvar, order, npts):
    rng = np.random.default_rng(seed)
    plan = _kernels.product_plan(nvar, order)
    a, b = rng.normal(size=(2, plan.size, npts))
    fast = _kernels.truncated_product(a, b, plan, use_numba=True)
    slow = _kernels.truncated_product(a, b, plan, use_numba=False)
    assert np.allclose(fast, slow, rtol=1e-14, atol=1e-14)


@needs_numba
def test_truncated_product_complex_and_broadcast():
    plan = _kernels.product_plan(2, 3)
    rng = np.random.default_rng(1)
    a = rng.normal(size=(plan.size, 4)) + 1j * rng.normal(size=(plan.size, 4))
    b = rng.normal(size=(plan.size, 1))
    fast = _kernels.truncated_product(a, b, plan, use_numba=True)
    assert np.allclose(fast, _kernels.truncated_product(a, b, plan, use_numba=False))


@needs_numba
@given(st.integers(0, 10**6), st.integers(0, 8))
def test_cutoff_paths_agree(seed, order):
    t = np.random.default_rng(seed).uniform(-0.2, 1.2, 257)
    fast = _kernels.cutoff_derivatives(t, order, use_numba=True)
    slow = _kernels.cutoff_derivatives(t, order, use_numba=False)
    assert np.allclose(fast, slow, rtol=1e-13, atol=1e-10)


def test_product_plan_size():
    from math import comb

    for nvar in range(1, 5):
        for order in range(0, 6):
            assert _kernels.product_plan(nvar, order).size == comb(nvar + order, order)


def test_env_flag_disables_numba():
    code = "from cuspbounds import _kernels; print(_kernels.numba_enabled(), _kernels.USE_NUMBA)"
    env = dict(os.environ, CUSPBOUNDS_DISABLE_NUMBA="1")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    assert out.stdout.split() == ["False", "False"]


def test_end_to_end_results_identical_across_paths(monkeypatch):
    st_ = product_state(["1s", "2s"])
    x = np.random.default_rng(3).normal(size=(50, 2, 3))
    alpha = [(2, 1, 0), (1, 0, 0)]
    monkeypatch.setattr(_kernels, "USE_NUMBA", False)
    slow = partial_alpha(st_.psi, x, alpha)
    monkeypatch.setattr(_kernels, "USE_NUMBA", _kernels._HAVE_NUMBA)
    fast = partial_alpha(st_.psi, x, alpha)
    assert np.allclose(fast, slow, rtol=1e-13, atol=1e-15)
