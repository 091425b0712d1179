import os
import subprocess
import sys

import numpy as np
import pytest

from drawstring import _kernels_py as pure
from drawstring.flat_torus_analysis import ewald_parameters

compiled = pytest.importorskip("drawstring._kernels")


def test_hermite_agrees():
    xs = np.linspace(0, 1, 101)
    F, D1, D2 = np.exp(xs), np.exp(xs), np.exp(xs)
    z = np.random.default_rng(0).random(5000)
    a = pure.hermite5(z, 0.0, 0.01, F, D1, D2)
    b = compiled.hermite5(z, 0.0, 0.01, F, D1, D2)
    assert np.max(np.abs(np.asarray(a) - np.asarray(b))) <= 1e-14
    assert np.max(np.abs(np.asarray(a) - np.exp(z))) <= 1e-12


@pytest.mark.parametrize("t", [1j, 0.5 + 1j, -0.2 + 2.8j])
def test_ewald_agrees(t):
    rng = np.random.default_rng(1)
    w = rng.random(500) + rng.random(500) * t
    args = (w.real, w.imag, t.real, t.imag, *ewald_parameters(t)[:3])
    for a, b in zip(pure.ewald_green(*args), compiled.ewald_green(*args)):
        assert np.max(np.abs(np.asarray(a) - np.asarray(b))) <= 1e-13


def test_pure_fallback_selected_by_environment():
    env = dict(os.environ, DRAWSTRING_PURE="1")
    out = subprocess.run([sys.executable, "-c", "from drawstring import _core; print(_core.COMPILED)"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "False"
