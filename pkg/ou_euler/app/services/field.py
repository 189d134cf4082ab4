"""
Galerkin vector field of the spectral vorticity dynamics.

    B_k(phi) = (c/|k|) sum_{|q|<|p|} (|p| - |q|) A(p, q, k) phi_p phi_q,   |k| > 0
    B_0      = 0 (phi_0 is carried as a frozen constant)

The prefactor c/|k| is fixed by projecting -(grad^perp phi . grad) L^c phi onto H_k
and dividing by -c|k| (see oracle_vector_field). Both p and q range over the basis.
"""

import logging
import math
from dataclasses import dataclass
from typing import Dict, Optional

import numpy as np
import scipy.sparse as sp

from ..domain import FieldContext, GalerkinBasis, GaussianParams, InteractionTable, SpectralField, as_index
from . import hermite
from .errors import InvalidArgumentError

logger = logging.getLogger(__name__)


@dataclass
class _Operators:
    p: np.ndarray
    q: np.ndarray
    k: np.ndarray
    weights: np.ndarray          # (c/|k|)(|p|-|q|) A(p,q,k) per stored entry
    scatter: sp.csr_matrix       # (d, nnz): sums entry contributions into their k
    trace: np.ndarray            # d: linear functional giving sum_k dB_k/dphi_k
    gibbs: np.ndarray            # d: (1+c|k|)^2


def make_context(basis: GalerkinBasis, table: InteractionTable, params: GaussianParams, gamma: float) -> FieldContext:
    ctx = FieldContext(basis=basis, table=table, params=params, gamma=gamma)
    _operators(ctx)
    return ctx


def _operators(ctx: FieldContext) -> _Operators:
    if ctx._operators is not None:
        return ctx._operators
    table = ctx.table
    basis = ctx.basis
    orders = basis.orders.astype(float)
    p, q, k = table.p_idx.astype(np.int64), table.q_idx.astype(np.int64), table.k_idx.astype(np.int64)
    weights = ctx.c / orders[k] * (orders[p] - orders[q]) * table.values
    nnz = weights.shape[0]
    scatter = sp.csr_matrix((np.ones(nnz), (k, np.arange(nnz))), shape=(basis.d, nnz))
    trace = np.zeros(basis.d)
    on_p = p == k
    on_q = q == k
    np.add.at(trace, q[on_p], weights[on_p])
    np.add.at(trace, p[on_q], weights[on_q])
    ctx._operators = _Operators(p, q, k, weights, scatter, trace, (1.0 + ctx.c * orders) ** 2)
    logger.debug("Assembled field operators: d=%d, nnz=%d", basis.d, nnz)
    return ctx._operators


def _check_field(ctx: FieldContext, phi: SpectralField):
    if phi.basis != ctx.basis:
        raise InvalidArgumentError(
            f"field basis (N={phi.basis.max_index}) does not match context basis (N={ctx.basis.max_index})"
        )


def _require_positive_order(k) -> None:
    if as_index(k).order == 0:
        raise InvalidArgumentError("B has no (0,0) component; |k| must be positive")


# ---------------------------------------------------------------------------
# Field, gradients, divergence
# ---------------------------------------------------------------------------

def vector_field_batch(ctx: FieldContext, coeffs: np.ndarray) -> np.ndarray:
    """B for a batch of coefficient rows, shape (M, d) -> (M, d)."""
    ops = _operators(ctx)
    coeffs = np.atleast_2d(coeffs)
    products = coeffs[:, ops.p] * coeffs[:, ops.q] * ops.weights
    return np.asarray(ops.scatter @ products.T).T


def vector_field(ctx: FieldContext, phi: SpectralField) -> SpectralField:
    _check_field(ctx, phi)
    return phi.with_coeffs(vector_field_batch(ctx, phi.coeffs)[0])


def gradient_matrix(ctx: FieldContext, phi: SpectralField) -> np.ndarray:
    """G[k, j] = D_{H_j} B_k(phi) = (c/|k|) sum_q (|j| - |q|) A(j, q, k) phi_q."""
    _check_field(ctx, phi)
    ops = _operators(ctx)
    d = ctx.basis.d
    rows = np.concatenate([ops.k, ops.k])
    cols = np.concatenate([ops.p, ops.q])
    vals = np.concatenate([ops.weights * phi.coeffs[ops.q], ops.weights * phi.coeffs[ops.p]])
    return sp.coo_matrix((vals, (rows, cols)), shape=(d, d)).toarray()


def gradient_entry(ctx: FieldContext, j, k, phi: SpectralField) -> complex:
    _require_positive_order(k)
    g = gradient_matrix(ctx, phi)
    return complex(g[ctx.basis.position(k), ctx.basis.position(j)])


def second_gradient_entry(ctx: FieldContext, i, j, k) -> float:
    """D_{H_i} D_{H_j} B_k = (c/|k|)(|j| - |i|) A(j, i, k); constant in phi."""
    _require_positive_order(k)
    i, j, k = as_index(i), as_index(j), as_index(k)
    return ctx.c / k.order * (j.order - i.order) * ctx.table.get(j, i, k)


def divergence_batch(ctx: FieldContext, coeffs: np.ndarray) -> np.ndarray:
    """
    Real-coordinate divergence with respect to mu^n for each row:
    sum of d(component)/d(coordinate) plus <B, grad log eta>.

    B is holomorphic in phi, so the Lebesgue part is 2 Re sum_k dB_k/dphi_k.
    """
    ops = _operators(ctx)
    coeffs = np.atleast_2d(coeffs)
    b = vector_field_batch(ctx, coeffs)
    lebesgue = 2.0 * np.real(coeffs @ ops.trace)
    gibbs = -ctx.gamma * np.sum(ops.gibbs * np.real(b * np.conj(coeffs)), axis=1)
    return lebesgue + gibbs


def divergence(ctx: FieldContext, phi: SpectralField) -> float:
    _check_field(ctx, phi)
    return float(divergence_batch(ctx, phi.coeffs)[0])


def divergence_paper_form(ctx: FieldContext, phi: SpectralField) -> Dict[str, object]:
    """
    The complex-coordinate expression (one derivative per complex mode) next to the
    real-coordinate divergence. The two agree after reading the linear term as
    2 Re(.) and the cubic term as Re(.).
    """
    _check_field(ctx, phi)
    ops = _operators(ctx)
    b = vector_field_batch(ctx, phi.coeffs)[0]
    linear = complex(phi.coeffs @ ops.trace)
    cubic = complex(-ctx.gamma * np.sum(ops.gibbs * b * np.conj(phi.coeffs)))
    real_div = divergence(ctx, phi)
    reconciled = 2.0 * linear.real + cubic.real
    return {
        "linear": linear,
        "cubic": cubic,
        "complex_total": linear + cubic,
        "reconciled": reconciled,
        "real_divergence": real_div,
        "discrepancy": abs(reconciled - real_div),
    }


def gibbs_term(ctx: FieldContext, phi: SpectralField) -> float:
    """-gamma sum_k (1+c|k|)^2 Re(B_k conj(phi_k))."""
    ops = _operators(ctx)
    b = vector_field_batch(ctx, phi.coeffs)[0]
    return float(-ctx.gamma * np.sum(ops.gibbs * np.real(b * np.conj(phi.coeffs))))


def bruteforce_divergence(ctx: FieldContext, phi: SpectralField, h: float = 1e-5) -> float:
    """Central differences over every real coordinate plus the Gaussian drift term."""
    _check_field(ctx, phi)
    ops = _operators(ctx)
    d = ctx.basis.d
    base = phi.coeffs
    total = 0.0
    for j in range(d):
        for direction, part in ((1.0, np.real), (1j, np.imag)):
            plus = base.copy()
            minus = base.copy()
            plus[j] += direction * h
            minus[j] -= direction * h
            bp = vector_field_batch(ctx, plus)[0, j]
            bm = vector_field_batch(ctx, minus)[0, j]
            total += float(part(bp - bm)) / (2 * h)
    b = vector_field_batch(ctx, base)[0]
    drift = -ctx.gamma * np.sum(ops.gibbs * (b.real * base.real + b.imag * base.imag))
    return float(total + drift)


def hs_norm_batch(ctx: FieldContext, coeffs: np.ndarray, beta: float = 2.0) -> np.ndarray:
    """
    Hilbert-Schmidt norm of grad B from H^2_sigma to H^beta_sigma:
    sum_{j,k} |D_{H_j} B_k|^2 (1+c|k|)^beta / (1+c|j|)^2.
    """
    coeffs = np.atleast_2d(coeffs)
    orders = ctx.basis.orders
    weight = np.outer((1.0 + ctx.c * orders) ** beta, (1.0 + ctx.c * orders) ** -2.0)
    out = np.empty(coeffs.shape[0])
    for m, row in enumerate(coeffs):
        g = gradient_matrix(ctx, SpectralField(ctx.basis, row, ctx.c))
        out[m] = math.sqrt(float(np.sum(weight * np.abs(g) ** 2)))
    return out


def hs_norm(ctx: FieldContext, phi: SpectralField, beta: float = 2.0) -> float:
    _check_field(ctx, phi)
    return float(hs_norm_batch(ctx, phi.coeffs, beta)[0])


def sobolev_sq_batch(ctx: FieldContext, coeffs: np.ndarray, beta: float) -> np.ndarray:
    """||B(phi)||^2_beta for each row."""
    b = vector_field_batch(ctx, coeffs)
    return np.sum((1.0 + ctx.c * ctx.basis.orders) ** beta * np.abs(b) ** 2, axis=1)


def enstrophy(phi: SpectralField) -> float:
    """sum (c|k|)^2 |phi_k|^2, logged as a diagnostic only."""
    return float(np.sum((phi.c * phi.basis.orders) ** 2 * np.abs(phi.coeffs) ** 2))


# ---------------------------------------------------------------------------
# Quadrature oracle
# ---------------------------------------------------------------------------

def oracle_vector_field(ctx: FieldContext, phi: SpectralField, order: Optional[int] = None) -> SpectralField:
    """
    Project -(grad^perp phi . grad) L^c phi onto each H_k by tensor Gauss quadrature
    and divide by -c|k|.
    """
    _check_field(ctx, phi)
    n = ctx.basis.max_index
    if order is None:
        order = hermite.quadrature_order(3 * n)
    norm = ctx.params.normalized()
    rule = hermite.quadrature_rule(order, norm)
    x1, x2, w = rule.grid()
    pts = np.stack([x1, x2], axis=-1)
    velocity = hermite.grad_perp_field(phi, pts)
    vorticity_grad = hermite.grad_field(hermite.apply_ou(phi), pts)
    nonlinear = -(velocity[..., 0] * vorticity_grad[..., 0] + velocity[..., 1] * vorticity_grad[..., 1])
    t = hermite.hermite_table(n, ctx.c, rule.nodes)
    out = np.zeros(ctx.basis.d, dtype=np.complex128)
    for i, k in enumerate(ctx.basis.indices):
        if k.order == 0:
            continue
        proj = np.sum(w * nonlinear * np.outer(t[k.k1], t[k.k2]))
        out[i] = proj / (-ctx.c * k.order)
    return phi.with_coeffs(out)


def moment_regularity(ctx: FieldContext, coeffs: np.ndarray, beta: float = 2.0) -> Dict[str, float]:
    """Monte Carlo estimate of E ||B(phi)||^2_beta over a batch of samples."""
    values = sobolev_sq_batch(ctx, coeffs, beta)
    m = values.shape[0]
    se = float(np.std(values, ddof=1) / math.sqrt(m)) if m > 1 else float("nan")
    return {"beta": beta, "estimate": float(np.mean(values)), "standard_error": se, "n_samples": m}
