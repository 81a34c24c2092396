import os
import subprocess
import sys

import numpy as np
import pytest

from cgolab import _kernels_py, kernels
from cgolab.spectral import make_grid

compiled = pytest.importorskip("cgolab._kernels")


@pytest.fixture
def data():
    spec = make_grid(3, 16)
    rng = np.random.default_rng(9)
    c = rng.normal(size=spec.shape) + 1j * rng.normal(size=spec.shape)
    zeta = np.array([1.0, 1j, 0.0]) + np.array([0, 0, -0.05j])
    return spec, kernels._axis(spec), c, zeta


@pytest.mark.parametrize("lam", [-1.0, -0.5, 0.5, 1.0])
def test_weighted_sum_agrees(data, lam):
    _, xi, c, z = data
    a = compiled.weighted_sq_sum(xi, c, z, 0.1, lam)
    b = _kernels_py.weighted_sq_sum(xi, c, z, 0.1, lam)
    assert a == pytest.approx(b, rel=1e-12)


@pytest.mark.parametrize("power", [1.0, 0.5])
def test_divide_symbol_agrees(data, power):
    _, xi, c, z = data
    a = compiled.divide_symbol(xi, c, z, 0.1, 1e-9, power)
    b = _kernels_py.divide_symbol(xi, c, z, 0.1, 1e-9, power)
    assert np.allclose(np.asarray(a[0]), np.asarray(b[0]), rtol=1e-12, atol=0)
    assert a[1:] == b[1:]


def test_ball_sum_agrees(data):
    _, xi, _, z = data
    center = np.array([0.5, 0.0, 0.25])
    a = compiled.ball_symbol_sum(xi, center, 3.0, z, 0.1, 1.0, 1.0)
    b = _kernels_py.ball_symbol_sum(xi, center, 3.0, z, 0.1, 1.0, 1.0)
    assert a == pytest.approx(b, rel=1e-12)


def test_environment_switch_selects_fallback():
    env = dict(os.environ, CGOLAB_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", "from cgolab import kernels; print(kernels.BACKEND)"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"
    assert kernels.BACKEND == ("python" if os.environ.get("CGOLAB_PURE_PYTHON") else "compiled")
