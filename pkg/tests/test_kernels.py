"""Compiled and NumPy residual kernels against each other and the closed form."""
import importlib

import numpy as np
import pytest

from chaindefect import _backend, _fallback
from chaindefect.inversion import ForwardModel
from chaindefect.measurement import SGrid, synthesize
from chaindefect.model import ChainConfig, DefectHypothesis
from chaindefect.spectral import analytic_x1

compiled = pytest.importorskip("chaindefect._kernels")


@pytest.fixture(scope="module")
def setup():
    chain = ChainConfig()
    grid = SGrid(0.0, 100.0, 501)
    model = ForwardModel(chain, grid)
    target = synthesize(chain, DefectHypothesis(40, 1.3), grid)
    return chain, grid, model, target


@pytest.mark.parametrize("j", [2, 40, 99, 100])
def test_backends_agree(setup, j):
    _, _, model, target = setup
    base, rational = model.coefficients(j)
    ks = np.linspace(0.1, 5.0, 97)
    a = compiled.residual_batch(ks, rational, base - target, model.weights)
    b = _fallback.residual_batch(ks, rational, base - target, model.weights)
    np.testing.assert_allclose(a, b, rtol=1e-12)


def test_rational_form_matches_closed_form(setup):
    chain, grid, model, _ = setup
    for j, k in [(2, 0.1), (40, 1.3), (77, 4.9)]:
        base, rational = model.coefficients(j)
        e1, e2, d1, d2 = rational
        c = 1.0 - k
        x1 = base + c * (e1 + c * e2) / (1 + c * (d1 + c * d2))
        np.testing.assert_allclose(x1, analytic_x1(j, k, grid.nodes, chain), rtol=1e-12)


def test_residual_is_quadrature_of_squared_difference(setup):
    chain, grid, model, target = setup
    x = analytic_x1(55, 0.7, grid.nodes, chain)
    expected = grid.weights() @ (x - target) ** 2
    assert _backend.residual_batch(np.array([0.7]), model.coefficients(55)[1],
                                   model.coefficients(55)[0] - target,
                                   model.weights)[0] == pytest.approx(expected, rel=1e-11)


def test_degenerate_denominator_gives_inf():
    rational = np.zeros((4, 3))
    rational[2] = -1.0          # den = 1 - c = k, zero at k = 0
    for kernel in (compiled.residual_batch, _fallback.residual_batch):
        q = kernel(np.array([0.0, 0.5]), rational, np.zeros(3), np.ones(3))
        assert np.isinf(q[0]) and q[1] == 0.0


def test_shape_mismatch_rejected():
    with pytest.raises(ValueError):
        compiled.residual_batch(np.ones(2), np.zeros((4, 5)), np.zeros(4), np.ones(4))


def test_env_var_forces_fallback(monkeypatch):
    monkeypatch.setenv("CHAINDEFECT_PURE_PYTHON", "1")
    mod = importlib.reload(_backend)
    try:
        assert mod.BACKEND == "python" and mod.residual_batch is _fallback.residual_batch
    finally:
        monkeypatch.delenv("CHAINDEFECT_PURE_PYTHON")
        importlib.reload(_backend)
    assert _backend.BACKEND == "cython"
