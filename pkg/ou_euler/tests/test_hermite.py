import math

import numpy as np
import pytest
from scipy.integrate import trapezoid

from ..app.domain import GalerkinBasis, GaussianParams, NormalizationMode, SpectralField
from ..app.services import coeffs, hermite
from ..app.services.errors import InvalidArgumentError

PARAMS = GaussianParams(0.5)


def _points(n=32, seed=1):
    return np.random.default_rng(seed).standard_normal((n, 2)) / math.sqrt(PARAMS.c)


def test_quadrature_weights_total():
    rule = hermite.quadrature_rule(10, PARAMS)
    assert np.sum(rule.weights) == pytest.approx(1.0, abs=1e-14)
    paper = GaussianParams(0.5, NormalizationMode.PAPER)
    rule = hermite.quadrature_rule(10, paper)
    assert np.sum(rule.weights) ** 2 == pytest.approx(1.0 / 0.5, rel=1e-13)
    assert hermite.weight_total(paper) == pytest.approx(2.0)


def test_quadrature_rejects_bad_order():
    with pytest.raises(InvalidArgumentError):
        hermite.quadrature_rule(0, PARAMS)


def test_gaussian_params_range():
    for bad in (0.0, 1.0, -0.3, float("nan")):
        with pytest.raises(InvalidArgumentError):
            GaussianParams(bad)


def test_low_order_polynomials():
    x = np.linspace(-3, 3, 7)
    c = PARAMS.c
    assert np.allclose(hermite.hermite_1d(0, PARAMS, x), 1.0)
    assert np.allclose(hermite.hermite_1d(1, PARAMS, x), -math.sqrt(c) * x)
    assert np.allclose(hermite.hermite_1d(2, PARAMS, x), (c * x ** 2 - 1) / math.sqrt(2))


def test_derivative_rule_matches_closed_form():
    x = np.linspace(-2, 2, 5)
    c = PARAMS.c
    assert np.allclose(hermite.hermite_1d_derivative(2, PARAMS, x), math.sqrt(2) * c * x)
    assert np.allclose(hermite.hermite_1d_derivative(0, PARAMS, x), 0.0)
    assert np.allclose(hermite.hermite_1d_derivative(2, PARAMS, x, order=2), math.sqrt(2) * c)


def test_orthonormality():
    for c in (0.1, 0.5, 0.9):
        assert hermite.orthonormality_deviation(GalerkinBasis.box(5), GaussianParams(c)) < 1e-10


def test_recurrence_and_derivative_residuals():
    x = _points()[:, 0]
    assert hermite.recurrence_residual(10, PARAMS, x) < 1e-10
    assert hermite.derivative_residual(10, PARAMS, x) < 1e-5


def test_eigenrelation():
    assert hermite.eigenrelation_residual(GalerkinBasis.box(4), PARAMS, _points()) < 1e-8


def test_hermite_function_relation():
    pts = _points(16)
    for k in [(0, 0), (1, 2), (3, 1), (4, 4)]:
        assert hermite.hermite_relation_residual(k, PARAMS, pts) < 1e-8


def test_hermite_functions_are_normalized():
    x = np.linspace(-15, 15, 20001)
    for n in (0, 3, 7):
        assert trapezoid(hermite.hermite_function_1d(n, x) ** 2, x) == pytest.approx(1.0, abs=1e-8)


def test_oscillator_eigenvalue():
    assert hermite.oscillator_eigenvalue((1, 1)) == pytest.approx(math.sqrt(6))
    assert hermite.oscillator_eigenvalue((0, 0)) == pytest.approx(math.sqrt(2))


def test_product_projection_matches_theta():
    assert hermite.product_projection(1, 1, 0, PARAMS) == pytest.approx(1.0, abs=1e-12)
    assert hermite.product_projection(1, 1, 2, PARAMS) == pytest.approx(math.sqrt(2), abs=1e-12)
    for n, m, r in [(3, 2, 1), (4, 4, 2), (5, 3, 0)]:
        assert hermite.product_projection(n, m, n + m - 2 * r, PARAMS) == pytest.approx(
            coeffs.theta(n, m, r), abs=1e-9)


def test_apply_ou_and_pointwise_agree():
    basis = GalerkinBasis.box(3)
    rng = np.random.default_rng(3)
    phi = SpectralField(basis, rng.standard_normal(basis.d) + 1j * rng.standard_normal(basis.d), PARAMS.c)
    pts = _points(10)
    lhs = hermite.ou_pointwise(phi, pts)
    rhs = hermite.eval_field(hermite.apply_ou(phi), pts)
    assert np.allclose(lhs, rhs, atol=1e-9)
    assert np.allclose(hermite.apply_ou(phi).coeffs, -PARAMS.c * basis.orders * phi.coeffs)


def test_sobolev_norm_and_cameron_martin_scale():
    basis = GalerkinBasis.box(2)
    phi = SpectralField.from_modes(basis, PARAMS.c, {(1, 1): 2.0})
    assert hermite.sobolev_norm(phi, 2.0) == pytest.approx(2.0 * (1 + 2 * PARAMS.c))
    scale = hermite.cameron_martin_scale(basis, PARAMS.c)
    assert scale[basis.position((1, 1))] == pytest.approx(1.0 / (1 + 2 * PARAMS.c))


def test_l2_norm_by_quadrature_is_coefficient_norm():
    basis = GalerkinBasis.box(3)
    rng = np.random.default_rng(5)
    phi = SpectralField(basis, rng.standard_normal(basis.d), PARAMS.c)
    assert hermite.l2_norm_by_quadrature(phi) == pytest.approx(np.linalg.norm(phi.coeffs), rel=1e-10)


def test_velocity_is_rotated_gradient():
    basis = GalerkinBasis.box(2)
    phi = SpectralField.from_modes(basis, PARAMS.c, {(1, 0): 1.0})
    x = np.array([0.3, -0.7])
    # phi = -sqrt(c) x1, so grad = (-sqrt(c), 0) and grad^perp = (0, -sqrt(c))
    assert np.allclose(hermite.grad_field(phi, x), [-math.sqrt(PARAMS.c), 0.0])
    assert np.allclose(hermite.grad_perp_field(phi, x), [0.0, -math.sqrt(PARAMS.c)])
