"""Compiled and numpy backends must agree exactly."""
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from persistlab import _core_py, core

_core = pytest.importorskip("persistlab._core")

finite = st.floats(-5, 5, allow_nan=False, width=64)
paths = arrays(np.float64, st.tuples(st.integers(1, 12), st.integers(2, 30)), elements=finite)


@given(paths, finite)
@settings(max_examples=200, deadline=None)
def test_first_exceed_agrees(v, level):
    np.testing.assert_array_equal(_core.first_exceed(v, level), _core_py.first_exceed(v, level))


@given(paths, st.floats(1e-3, 2.0))
@settings(max_examples=200, deadline=None)
def test_cumtrapz_agrees(v, dt):
    np.testing.assert_allclose(_core.cumtrapz(v, dt), _core_py.cumtrapz(v, dt), rtol=1e-13, atol=1e-13)


@given(paths, st.floats(1e-3, 2.0), finite)
@settings(max_examples=200, deadline=None)
def test_trapz_first_exceed_agrees(v, dt, level):
    a = _core.trapz_first_exceed(v, dt, level)
    b = _core_py.trapz_first_exceed(v, dt, level)
    # a value landing exactly on the level can flip with summation order; guard
    x = _core_py.cumtrapz(v, dt)[:, 1:]
    if not np.any(np.isclose(x, level, rtol=0, atol=1e-12)):
        np.testing.assert_array_equal(a, b)


@given(paths, st.data(), finite)
@settings(max_examples=200, deadline=None)
def test_event_flags_agree(v, data, level):
    inside = np.array(data.draw(st.lists(st.booleans(), min_size=v.shape[1], max_size=v.shape[1])))
    np.testing.assert_array_equal(_core.event_flags(v, inside, level), _core_py.event_flags(v, inside, level))


def test_genz_sov_agrees():
    rng = np.random.default_rng(3)
    A = rng.standard_normal((6, 6))
    L = np.linalg.cholesky(A @ A.T + 6 * np.eye(6))
    b = rng.uniform(-1, 2, 6)
    w = rng.uniform(size=(500, 5))
    np.testing.assert_allclose(_core.genz_sov(L, b, w), _core_py.genz_sov(L, b, w), rtol=1e-12, atol=1e-15)


def test_first_exceed_examples():
    v = np.array([[0.0, 0.5, 1.0, 2.0], [0.0, -1.0, 0.2, 0.3]])
    np.testing.assert_array_equal(core.first_exceed(v, 1.0), [2, 4])
    np.testing.assert_array_equal(core.all_below(v, 1.0), [False, True])


def test_cumtrapz_linear_exact():
    t = np.linspace(0, 1, 11)
    np.testing.assert_allclose(core.cumtrapz(t[None, :], 0.1)[0], t**2 / 2, atol=1e-15)


def test_backend_name():
    assert core.BACKEND in ("cython", "numpy")


def test_pure_env_selects_numpy():
    import os
    import subprocess
    import sys

    env = dict(os.environ, PERSISTLAB_PURE="1")
    out = subprocess.run([sys.executable, "-c", "from persistlab import core; print(core.BACKEND)"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "numpy"
