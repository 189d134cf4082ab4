"""
Hermite polynomials H_n^c, Hermite functions h_n, the Ornstein-Uhlenbeck operator
in coefficient space, Gauss-Hermite quadrature and Gaussian Sobolev norms.

Constants follow the defining (Rodrigues-type) formula

    H_n^c(x) = (c^n n!)^{-1/2} e^{c x^2/2} d^n/dx^n e^{-c x^2/2} = (-1)^n He_n(sqrt(c) x) / sqrt(n!)

with He_n the probabilists' Hermite polynomial. From it:

    d/dx H_n^c        = -sqrt(c n) H_{n-1}^c
    H_{n+1}^c(x)      = -(sqrt(c) x H_n^c(x) + sqrt(n) H_{n-1}^c(x)) / sqrt(n+1)

The commonly quoted forms "-(sqrt(n)/c) H_{n-1}" and the matching recursion only agree
with the defining formula at c = 1; they are not used here.
"""

import logging
import math
from typing import Optional, Tuple, Union

import numpy as np
from numpy.polynomial import hermite_e
from scipy.special import gammaln, roots_hermitenorm

from ..domain import GalerkinBasis, GaussianParams, MultiIndex, NormalizationMode, QuadratureRule, SpectralField, as_index
from .errors import InvalidArgumentError

logger = logging.getLogger(__name__)

ArrayLike = Union[float, np.ndarray]

SQRT_2PI = math.sqrt(2.0 * math.pi)


# ---------------------------------------------------------------------------
# Quadrature
# ---------------------------------------------------------------------------

def quadrature_order(degree: int) -> int:
    """Nodes per axis for an integrand of polynomial degree `degree` under the Gaussian weight."""
    return int(math.ceil((degree + 1) / 2.0)) + 4


def quadrature_rule(order: int, params: GaussianParams) -> QuadratureRule:
    """
    Gauss rule exact for polynomials of degree <= 2*order-1 against e^{-c x^2/2}.

    In normalized mode the 1D weights sum to 1; in paper mode they carry the
    1/sqrt(2 pi) per-axis constant so the 2D product integrates to 1/c.
    """
    if order < 1:
        raise InvalidArgumentError(f"quadrature order must be >= 1, got {order}")
    c = params.c
    if not math.isfinite(c):
        raise InvalidArgumentError(f"c must be finite, got {c}")
    y, w = roots_hermitenorm(order)
    nodes = y / math.sqrt(c)
    weights = w / SQRT_2PI
    if params.normalization_mode == NormalizationMode.PAPER:
        weights = weights / math.sqrt(c)
    return QuadratureRule(nodes=np.asarray(nodes), weights=np.asarray(weights), c=c, degree=2 * order - 1)


def weight_total(params: GaussianParams) -> float:
    """Total mass of the 2D weight: 1 (normalized) or 1/c (paper)."""
    if params.normalization_mode == NormalizationMode.PAPER:
        return 1.0 / params.c
    return 1.0


# ---------------------------------------------------------------------------
# Hermite polynomials
# ---------------------------------------------------------------------------

def hermite_table(n_max: int, c: float, x: ArrayLike) -> np.ndarray:
    """All H_0^c .. H_{n_max}^c at x by forward recurrence; shape (n_max+1,) + x.shape."""
    x = np.asarray(x, dtype=float)
    table = np.empty((n_max + 1,) + x.shape)
    table[0] = 1.0
    if n_max >= 1:
        sc = math.sqrt(c)
        table[1] = -sc * x
        for n in range(1, n_max):
            table[n + 1] = -(sc * x * table[n] + math.sqrt(n) * table[n - 1]) / math.sqrt(n + 1)
    return table


def _shifted(table: np.ndarray, n: int) -> np.ndarray:
    # H_{-1} is 0 so the derivative rule is total
    if n < 0:
        return np.zeros(table.shape[1:])
    return table[n]


def hermite_1d(n: int, params: GaussianParams, x: ArrayLike) -> ArrayLike:
    if n < 0:
        raise InvalidArgumentError(f"Hermite index must be non-negative, got {n}")
    out = hermite_table(n, params.c, x)[n]
    return float(out) if np.ndim(out) == 0 else out


def rodrigues_1d(n: int, params: GaussianParams, x: ArrayLike) -> ArrayLike:
    """Direct evaluation of the defining formula through the He_n series."""
    if n < 0:
        raise InvalidArgumentError(f"Hermite index must be non-negative, got {n}")
    coef = np.zeros(n + 1)
    coef[n] = 1.0
    out = (-1.0) ** n * hermite_e.hermeval(math.sqrt(params.c) * np.asarray(x, dtype=float), coef)
    out = out * math.exp(-0.5 * gammaln(n + 1))
    return float(out) if np.ndim(out) == 0 else out


def hermite_1d_derivative(n: int, params: GaussianParams, x: ArrayLike, order: int = 1) -> ArrayLike:
    """First or second derivative of H_n^c from the derived lowering rule."""
    if n < 0:
        raise InvalidArgumentError(f"Hermite index must be non-negative, got {n}")
    c = params.c
    table = hermite_table(max(n, 0), c, x)
    if order == 1:
        out = -math.sqrt(c * n) * _shifted(table, n - 1)
    elif order == 2:
        out = c * math.sqrt(n * max(n - 1, 0)) * _shifted(table, n - 2)
    else:
        raise InvalidArgumentError(f"derivative order must be 1 or 2, got {order}")
    return float(out) if np.ndim(out) == 0 else out


def hermite_2d(k, params: GaussianParams, x: np.ndarray) -> ArrayLike:
    k = as_index(k)
    x = np.asarray(x, dtype=float)
    out = hermite_1d(k.k1, params, x[..., 0]) * hermite_1d(k.k2, params, x[..., 1])
    return float(out) if np.ndim(out) == 0 else out


# ---------------------------------------------------------------------------
# Hermite functions
# ---------------------------------------------------------------------------

def hermite_function_table(n_max: int, x: ArrayLike) -> np.ndarray:
    """L^2(R)-orthonormal Hermite functions h_0 .. h_{n_max} (stable recurrence)."""
    x = np.asarray(x, dtype=float)
    table = np.empty((n_max + 1,) + x.shape)
    table[0] = np.pi ** -0.25 * np.exp(-0.5 * x * x)
    if n_max >= 1:
        table[1] = math.sqrt(2.0) * x * table[0]
        for n in range(1, n_max):
            table[n + 1] = math.sqrt(2.0 / (n + 1)) * x * table[n] - math.sqrt(n / (n + 1)) * table[n - 1]
    return table


def hermite_function_1d(n: int, x: ArrayLike) -> ArrayLike:
    if n < 0:
        raise InvalidArgumentError(f"Hermite index must be non-negative, got {n}")
    out = hermite_function_table(n, x)[n]
    return float(out) if np.ndim(out) == 0 else out


def hermite_function(k, x: np.ndarray) -> ArrayLike:
    """2D Hermite function h_k(x) = h_{k1}(x1) h_{k2}(x2)."""
    k = as_index(k)
    x = np.asarray(x, dtype=float)
    out = hermite_function_1d(k.k1, x[..., 0]) * hermite_function_1d(k.k2, x[..., 1])
    return float(out) if np.ndim(out) == 0 else out


def oscillator_eigenvalue(k) -> float:
    """lambda_k with lambda_k^2 = 2(|k| + 1), the eigenvalue of -Delta + |x|^2."""
    return math.sqrt(2.0 * (as_index(k).order + 1))


def hermite_relation_residual(k, params: GaussianParams, points: np.ndarray) -> float:
    """
    Max relative deviation of H_k^c(x) from (-1)^{|k|} sqrt(pi) h_k(sqrt(c/2) x) e^{c|x|^2/4}.
    The sign is read as (-1)^{|k|}.
    """
    k = as_index(k)
    points = np.asarray(points, dtype=float)
    c = params.c
    lhs = hermite_2d(k, params, points)
    rhs = ((-1.0) ** k.order * math.sqrt(math.pi)
           * hermite_function(k, math.sqrt(c / 2.0) * points)
           * np.exp(c * np.sum(points ** 2, axis=-1) / 4.0))
    scale = np.maximum(1.0, np.abs(lhs))
    return float(np.max(np.abs(lhs - rhs) / scale))


# ---------------------------------------------------------------------------
# Coefficient-space operators
# ---------------------------------------------------------------------------

def apply_ou(field: SpectralField) -> SpectralField:
    """L^c in coefficient space: multiply phi_k by -c|k|."""
    return field.with_coeffs(-field.c * field.basis.orders * field.coeffs)


def sobolev_norm(field: SpectralField, beta: float) -> float:
    if not math.isfinite(beta):
        raise InvalidArgumentError(f"beta must be finite, got {beta}")
    weights = (1.0 + field.c * field.basis.orders) ** beta
    return float(math.sqrt(np.sum(weights * np.abs(field.coeffs) ** 2)))


def cameron_martin_scale(basis: GalerkinBasis, c: float) -> np.ndarray:
    """1/(1+c|k|): the factor turning H_k^c into the orthonormal basis of H^2_sigma."""
    return 1.0 / (1.0 + c * basis.orders)


# ---------------------------------------------------------------------------
# Pointwise evaluation
# ---------------------------------------------------------------------------

def _axis_tables(field: SpectralField, x: np.ndarray, derivative: int = 0) -> Tuple[np.ndarray, np.ndarray]:
    """Per-basis-element factors of H_k (or its derivative) along each axis; shape (d,) + points."""
    c = field.c
    basis = field.basis
    n1 = int(basis.k1.max())
    n2 = int(basis.k2.max())
    t1 = hermite_table(n1, c, x[..., 0])
    t2 = hermite_table(n2, c, x[..., 1])
    k1 = basis.k1
    k2 = basis.k2
    if derivative == 0:
        return t1[k1], t2[k2]
    zero1 = np.zeros((1,) + t1.shape[1:])
    zero2 = np.zeros((1,) + t2.shape[1:])
    # H_{-1} = 0 padding at position 0
    p1 = np.concatenate([zero1, zero1, t1], axis=0)
    p2 = np.concatenate([zero2, zero2, t2], axis=0)
    if derivative == 1:
        s1 = -np.sqrt(c * k1).reshape((-1,) + (1,) * (t1.ndim - 1))
        s2 = -np.sqrt(c * k2).reshape((-1,) + (1,) * (t2.ndim - 1))
        return s1 * p1[k1 + 1], s2 * p2[k2 + 1]
    s1 = (c * np.sqrt(k1 * np.maximum(k1 - 1, 0))).reshape((-1,) + (1,) * (t1.ndim - 1))
    s2 = (c * np.sqrt(k2 * np.maximum(k2 - 1, 0))).reshape((-1,) + (1,) * (t2.ndim - 1))
    return s1 * p1[k1], s2 * p2[k2]


def _contract(coeffs: np.ndarray, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return np.tensordot(coeffs, a * b, axes=(0, 0))


def _scalar(out):
    return complex(out) if np.ndim(out) == 0 else out


def eval_field(field: SpectralField, x: np.ndarray):
    """phi(x) for points of shape (..., 2)."""
    x = np.asarray(x, dtype=float)
    a0, b0 = _axis_tables(field, x, 0)
    return _scalar(_contract(field.coeffs, a0, b0))


def grad_field(field: SpectralField, x: np.ndarray) -> np.ndarray:
    """(d1 phi, d2 phi) stacked on the last axis."""
    x = np.asarray(x, dtype=float)
    a0, b0 = _axis_tables(field, x, 0)
    a1, b1 = _axis_tables(field, x, 1)
    d1 = _contract(field.coeffs, a1, b0)
    d2 = _contract(field.coeffs, a0, b1)
    return np.stack([d1, d2], axis=-1)


def grad_perp_field(field: SpectralField, x: np.ndarray) -> np.ndarray:
    """Velocity nabla^perp phi = (-d2 phi, d1 phi)."""
    g = grad_field(field, x)
    return np.stack([-g[..., 1], g[..., 0]], axis=-1)


def ou_pointwise(field: SpectralField, x: np.ndarray):
    """(Delta - c x . grad) phi evaluated pointwise from the derivative rule."""
    x = np.asarray(x, dtype=float)
    a0, b0 = _axis_tables(field, x, 0)
    a1, b1 = _axis_tables(field, x, 1)
    a2, b2 = _axis_tables(field, x, 2)
    lap = _contract(field.coeffs, a2, b0) + _contract(field.coeffs, a0, b2)
    drift = x[..., 0] * _contract(field.coeffs, a1, b0) + x[..., 1] * _contract(field.coeffs, a0, b1)
    return _scalar(lap - field.c * drift)


# ---------------------------------------------------------------------------
# Quadrature-based checks
# ---------------------------------------------------------------------------

def l2_norm_by_quadrature(field: SpectralField, rule: Optional[QuadratureRule] = None) -> float:
    """L^2_sigma norm of the reconstructed function (normalized weight)."""
    if rule is None:
        degree = 2 * int(max(field.basis.k1.max(), field.basis.k2.max()))
        rule = quadrature_rule(quadrature_order(degree), GaussianParams(field.c))
    x1, x2, w = rule.grid()
    values = eval_field(field, np.stack([x1, x2], axis=-1))
    return float(math.sqrt(np.sum(w * np.abs(values) ** 2)))


def gram_matrix(basis: GalerkinBasis, params: GaussianParams) -> np.ndarray:
    """<H_k, H_h>_sigma for all k, h in the basis, in normalized mode."""
    n = int(max(basis.k1.max(), basis.k2.max()))
    rule = quadrature_rule(quadrature_order(2 * n), params.normalized())
    t = hermite_table(n, params.c, rule.nodes)
    g1 = (t * rule.weights) @ t.T
    return g1[np.ix_(basis.k1, basis.k1)] * g1[np.ix_(basis.k2, basis.k2)]


def orthonormality_deviation(basis: GalerkinBasis, params: GaussianParams) -> float:
    g = gram_matrix(basis, params)
    return float(np.max(np.abs(g - np.eye(basis.d))))


def eigenrelation_residual(basis: GalerkinBasis, params: GaussianParams, points: np.ndarray) -> float:
    """Max relative residual of (Delta - c x.grad) H_k = -c|k| H_k over basis elements and points."""
    worst = 0.0
    for i, k in enumerate(basis.indices):
        single = SpectralField.zeros(basis, params.c)
        single.coeffs[i] = 1.0
        lhs = np.real(ou_pointwise(single, points))
        rhs = -params.c * k.order * hermite_2d(k, params, points)
        scale = np.maximum(np.abs(rhs), 1.0)
        worst = max(worst, float(np.max(np.abs(lhs - rhs) / scale)))
    return worst


def derivative_residual(n_max: int, params: GaussianParams, points: np.ndarray, step: float = 1e-5) -> float:
    """Max |central difference of H_n - (-sqrt(c n) H_{n-1})| relative to the scale of H_{n-1}."""
    worst = 0.0
    points = np.asarray(points, dtype=float)
    for n in range(n_max + 1):
        fd = (hermite_1d(n, params, points + step) - hermite_1d(n, params, points - step)) / (2 * step)
        exact = hermite_1d_derivative(n, params, points)
        scale = np.maximum(1.0, np.abs(exact))
        worst = max(worst, float(np.max(np.abs(fd - exact) / scale)))
    return worst


def recurrence_residual(n_max: int, params: GaussianParams, points: np.ndarray) -> float:
    """Max relative gap between the recurrence and the direct defining formula."""
    table = hermite_table(n_max, params.c, points)
    worst = 0.0
    for n in range(n_max + 1):
        direct = rodrigues_1d(n, params, points)
        scale = np.maximum(1.0, np.abs(direct))
        worst = max(worst, float(np.max(np.abs(table[n] - direct) / scale)))
    return worst


def product_projection(n: int, m: int, j: int, params: GaussianParams) -> float:
    """<H_n H_m, H_j>_sigma in 1D (normalized weight)."""
    rule = quadrature_rule(quadrature_order(n + m + j), params.normalized())
    t = hermite_table(max(n, m, j), params.c, rule.nodes)
    return float(np.sum(rule.weights * t[n] * t[m] * t[j]))
