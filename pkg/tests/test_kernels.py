import os
import subprocess
import sys

import numpy as np
import pytest

from dyncanon import _kernels
from dyncanon import generalham as gh
from dyncanon.triple import GBDTTriple, SignatureJ

from conftest import make_random

needs_ext = pytest.mark.skipif(_kernels.BACKEND != "cython", reason="compiled kernel not built")


def _problem(i, steps=200, h=0.01):
    t = make_random(i, seed=3)
    half = np.linspace(0, steps * h, 2 * steps + 1)
    Hs = np.stack([np.diag(1.0 + 0.3 * np.sin(np.arange(1, t.m + 1) * x)) for x in half]).astype(complex)
    return (t.A, t.Pi0, t.S0, t.sig.diag, Hs, h, steps)


@needs_ext
@pytest.mark.parametrize("i", range(5))
def test_backends_agree(i):
    args = _problem(i)
    a = _kernels.rk4_trajectory(*args)
    b = _kernels.rk4_trajectory_py(*args)
    assert a[3] == b[3] == -1
    for x, y in zip(a[:3], b[:3]):
        assert np.allclose(x, y, atol=1e-12, rtol=1e-12)


@needs_ext
def test_backends_agree_on_failure():
    t = GBDTTriple([[0.5j, 0], [0, 0.7j]], np.diag([1.0, -1.0]), np.zeros((2, 2)), SignatureJ(1, 1))
    Hs = np.broadcast_to(np.eye(2, dtype=complex), (21, 2, 2)).copy()
    a = _kernels.rk4_trajectory(t.A, t.Pi0, t.S0, t.sig.diag, Hs, 0.1, 10)
    b = _kernels.rk4_trajectory_py(t.A, t.Pi0, t.S0, t.sig.diag, Hs, 0.1, 10)
    assert a[3] == b[3] == 0
    assert np.all(np.isnan(a[0][1:])) and np.all(np.isnan(b[0][1:]))


def test_kernel_rejects_bad_table():
    args = list(_problem(0))
    args[4] = args[4][:-1]
    if _kernels.BACKEND == "cython":
        with pytest.raises(ValueError):
            _kernels.rk4_trajectory(*args)


def test_fallback_forced_by_env():
    env = dict(os.environ, DYNCANON_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", "import dyncanon._kernels as k; print(k.BACKEND)"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"


def test_integrate_backend_selection():
    t = make_random(0)
    H = gh.HamiltonianField.identity(t.m)
    a = gh.integrate(t, H, 1.0, 0.01, backend="python")
    b = gh.integrate(t, H, 1.0, 0.01)
    assert a.meta["backend"] == "python"
    assert b.meta["backend"] == _kernels.BACKEND
    assert np.allclose(a.S, b.S, atol=1e-12)
