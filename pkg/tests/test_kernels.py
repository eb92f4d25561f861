import os
import subprocess
import sys

import numpy as np
import pytest

from twolevel_consensus import _rk4_py, kernels
from twolevel_consensus.simulator import step_rk4

compiled = pytest.importorskip("twolevel_consensus._rk4", reason="compiled kernel not built")


@pytest.mark.parametrize("d", [1, 3, 12, 20])
def test_compiled_and_python_kernels_agree(d, rng):
    M = rng.normal(size=(d, d)) - 2 * np.eye(d)
    s0 = rng.normal(size=d)
    a = compiled.rk4_linear(M, s0, 1e-2, 500)
    b = _rk4_py.rk4_linear(M, s0, 1e-2, 500)
    assert a.shape == b.shape == (501, d)
    np.testing.assert_allclose(a, b, rtol=1e-12, atol=1e-13)


def test_kernel_matches_generic_step(rng):
    M = rng.normal(size=(5, 5))
    s0 = rng.normal(size=5)
    s = s0
    for k in range(50):
        s = step_rk4(s, 0.0, 1e-2, lambda t, x: M @ x)
    np.testing.assert_allclose(kernels.rk4_linear(M, s0, 1e-2, 50)[-1], s, rtol=1e-12, atol=1e-13)


@pytest.mark.parametrize("impl", ["compiled", "python"])
def test_kernel_non_finite(impl):
    fn = compiled.rk4_linear if impl == "compiled" else _rk4_py.rk4_linear
    with pytest.raises(FloatingPointError):
        fn(np.array([[1e200]]), np.array([1e200]), 1.0, 10)


def test_zero_steps_returns_initial_state():
    out = kernels.rk4_linear(np.eye(2), np.array([1.0, 2.0]), 0.1, 0)
    np.testing.assert_array_equal(out, [[1.0, 2.0]])


def test_backend_selection_env_override():
    code = "from twolevel_consensus import kernels; print(kernels.BACKEND)"
    env = dict(os.environ, TWOLEVEL_CONSENSUS_PURE="1")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"
    env.pop("TWOLEVEL_CONSENSUS_PURE")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "cython"
