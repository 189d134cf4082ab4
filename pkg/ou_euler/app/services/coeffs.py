"""
Triadic interaction coefficients.

Theta(n, m, r) is the coefficient of H_{n+m-2r} in the product H_n H_m.
A(p, q, k) is the c-free part of the projection of grad^perp H_p . grad H_q onto H_k:

    <grad^perp H_p^c . grad H_q^c, H_k^c>_sigma = c * A(p, q, k)

so the Galerkin field carries the remaining power of c (see field.vector_field).
The "-1" in p + q - 1 - k is the multi-index (1, 1): each tensor factor loses one
degree to one differentiation.
"""

import logging
import math
import struct
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Dict, Optional, Union

import numpy as np
from scipy.special import gammaln

from ..config import settings
from ..domain import GalerkinBasis, GaussianParams, InteractionTable, as_index
from . import hermite
from .errors import InvalidArgumentError, ResourceBudgetError

logger = logging.getLogger(__name__)

CACHE_MAGIC = b"OUE1"
# 1: A is c-free, B_k = (c/|k|) sum_{|q|<|p|} (|p|-|q|) A(p,q,k) phi_p phi_q
CONVENTION_TAG = 1

_RECORD = np.dtype([
    ("p1", "<u2"), ("p2", "<u2"),
    ("q1", "<u2"), ("q2", "<u2"),
    ("k1", "<u2"), ("k2", "<u2"),
    ("value", "<f8"),
])
_HEADER = struct.Struct("<4sII")


def _log_binom(n: np.ndarray, r: np.ndarray) -> np.ndarray:
    return gammaln(n + 1) - gammaln(r + 1) - gammaln(n - r + 1)


def theta_array(n, m, r) -> np.ndarray:
    """Vectorized Theta; 0 wherever the binomials are empty or r is out of range."""
    n = np.asarray(n, dtype=float)
    m = np.asarray(m, dtype=float)
    r = np.asarray(r, dtype=float)
    n, m, r = np.broadcast_arrays(n, m, r)
    # symmetric in (n, m) bit for bit, which makes A(p,q,k) = -A(q,p,k) exact
    n, m = np.minimum(n, m), np.maximum(n, m)
    valid = (n >= 0) & (m >= 0) & (r >= 0) & (r <= np.minimum(n, m)) & (r == np.floor(r))
    ns = np.where(valid, n, 0.0)
    ms = np.where(valid, m, 0.0)
    rs = np.where(valid, r, 0.0)
    log_sq = _log_binom(ns, rs) + _log_binom(ms, rs) + _log_binom(ns + ms - 2 * rs, ns - rs)
    return np.where(valid, np.exp(0.5 * log_sq), 0.0)


def theta(n: int, m: int, r) -> float:
    return float(theta_array(n, m, r))


def interaction_array(p1, p2, q1, q2, k1, k2) -> np.ndarray:
    """A(p, q, k) for broadcastable integer arrays of components."""
    p1, p2, q1, q2, k1, k2 = (np.asarray(a, dtype=np.int64) for a in (p1, p2, q1, q2, k1, k2))
    s1 = p1 + q1 - 1 - k1
    s2 = p2 + q2 - 1 - k2
    parity = (s1 >= 0) & (s2 >= 0) & (s1 % 2 == 0) & (s2 % 2 == 0)
    support = (p1 <= q1 + 1 + k1) & (q1 <= p1 + 1 + k1) & (p2 <= q2 + 1 + k2) & (q2 <= p2 + 1 + k2)
    r1 = np.where(parity, s1 // 2, -1)
    r2 = np.where(parity, s2 // 2, -1)
    first = -np.sqrt(p2 * q1) * theta_array(p1, q1 - 1, r1) * theta_array(p2 - 1, q2, r2)
    second = np.sqrt(p1 * q2) * theta_array(p1 - 1, q1, r1) * theta_array(p2, q2 - 1, r2)
    return np.where(parity & support, first + second, 0.0)


def interaction(p, q, k) -> float:
    p, q, k = as_index(p), as_index(q), as_index(k)
    return float(interaction_array(p.k1, p.k2, q.k1, q.k2, k.k1, k.k2))


def oracle_interaction(p, q, k, params: GaussianParams, order: Optional[int] = None) -> float:
    """
    (1/c) <grad^perp H_p . grad H_q, H_k>_sigma by Gauss quadrature, normalized weight.

    The integrand factorizes over the two axes, so each term is a product of two 1D
    quadratures built from the derivative rule alone.
    """
    p, q, k = as_index(p), as_index(q), as_index(k)
    degree = max(p.k1 + q.k1 + k.k1, p.k2 + q.k2 + k.k2)
    if order is None:
        order = hermite.quadrature_order(degree)
    elif 2 * order - 1 < degree:
        raise InvalidArgumentError(
            f"quadrature order {order} integrates degree {2 * order - 1} < required {degree}"
        )
    norm = params.normalized()
    rule = hermite.quadrature_rule(order, norm)
    x = rule.nodes
    w = rule.weights

    def h(n):
        return hermite.hermite_1d(n, norm, x)

    def dh(n):
        return hermite.hermite_1d_derivative(n, norm, x)

    # grad^perp H_p . grad H_q = -d2 H_p d1 H_q + d1 H_p d2 H_q
    first = -np.sum(w * h(p.k1) * dh(q.k1) * h(k.k1)) * np.sum(w * dh(p.k2) * h(q.k2) * h(k.k2))
    second = np.sum(w * dh(p.k1) * h(q.k1) * h(k.k1)) * np.sum(w * h(p.k2) * dh(q.k2) * h(k.k2))
    return float((first + second) / params.c)


def oracle_tensor(basis: GalerkinBasis, params: GaussianParams) -> np.ndarray:
    """
    The quadrature oracle for every (p, q, k) in the basis at once, shape (d, d, d).
    Built from the two 1D triple-product tensors sum w h_a h'_b h_e and sum w h'_a h_b h_e.
    """
    norm = params.normalized()
    n = int(max(basis.k1.max(), basis.k2.max()))
    rule = hermite.quadrature_rule(hermite.quadrature_order(3 * n), norm)
    t = hermite.hermite_table(n, norm.c, rule.nodes)
    dt = np.stack([hermite.hermite_1d_derivative(a, norm, rule.nodes) for a in range(n + 1)])
    w = rule.weights
    h_dh = np.einsum("x,ax,bx,ex->abe", w, t, dt, t)
    dh_h = np.einsum("x,ax,bx,ex->abe", w, dt, t, t)
    k1, k2 = basis.k1, basis.k2
    p1, q1, r1 = np.ix_(k1, k1, k1)
    p2, q2, r2 = np.ix_(k2, k2, k2)
    first = -h_dh[p1, q1, r1] * dh_h[p2, q2, r2]
    second = dh_h[p1, q1, r1] * h_dh[p2, q2, r2]
    return (first + second) / params.c


def closed_form_tensor(basis: GalerkinBasis) -> np.ndarray:
    """A(p, q, k) for every triple in the basis, shape (d, d, d)."""
    k1, k2 = basis.k1, basis.k2
    p1, q1, r1 = np.ix_(k1, k1, k1)
    p2, q2, r2 = np.ix_(k2, k2, k2)
    return interaction_array(p1, p2, q1, q2, r1, r2)


def admissible_mask(basis: GalerkinBasis) -> np.ndarray:
    """Triples meeting the parity and support conditions (where A may be nonzero)."""
    k1, k2 = basis.k1, basis.k2
    p1, q1, r1 = np.ix_(k1, k1, k1)
    p2, q2, r2 = np.ix_(k2, k2, k2)
    s1 = p1 + q1 - 1 - r1
    s2 = p2 + q2 - 1 - r2
    parity = (s1 >= 0) & (s2 >= 0) & (s1 % 2 == 0) & (s2 % 2 == 0)
    support = (p1 <= q1 + 1 + r1) & (q1 <= p1 + 1 + r1) & (p2 <= q2 + 1 + r2) & (q2 <= p2 + 1 + r2)
    return parity & support


# ---------------------------------------------------------------------------
# Tabulation
# ---------------------------------------------------------------------------

def estimate_table_mb(basis: GalerkinBasis) -> float:
    """Upper bound on table memory: every candidate triple stored."""
    return basis.d ** 3 * (3 * 4 + 8) / 1e6


def _tabulate_row(basis: GalerkinBasis, ip: int):
    k1 = basis.k1
    k2 = basis.k2
    orders = basis.orders
    p = basis.indices[ip]
    iq, ik = np.meshgrid(np.arange(basis.d), np.arange(basis.d), indexing="ij")
    iq = iq.ravel()
    ik = ik.ravel()
    keep = (orders[iq] < p.order) & (orders[ik] > 0) & (2 * p.order >= orders[ik])
    iq = iq[keep]
    ik = ik[keep]
    values = interaction_array(p.k1, p.k2, k1[iq], k2[iq], k1[ik], k2[ik])
    nz = values != 0.0
    iq = iq[nz]
    ik = ik[nz]
    return np.full(iq.shape, ip, dtype=np.int32), iq.astype(np.int32), ik.astype(np.int32), values[nz]


def build_table(basis: GalerkinBasis, threads: int = 1, budget_mb: Optional[float] = None) -> InteractionTable:
    """
    All nonzero A(p, q, k) with p, q, k in the basis, |q| < |p|, |k| > 0, |p| >= |k|/2.
    Rows are produced per p and concatenated in basis order, so the result does not
    depend on the worker count.
    """
    budget = settings.TABLE_BUDGET_MB if budget_mb is None else budget_mb
    required = estimate_table_mb(basis)
    if required > budget:
        raise ResourceBudgetError(basis.max_index, required, budget)
    logger.info("Tabulating interaction coefficients for N=%d (d=%d)", basis.max_index, basis.d)
    rows = range(basis.d)
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(lambda ip: _tabulate_row(basis, ip), rows))
    else:
        parts = [_tabulate_row(basis, ip) for ip in rows]
    if parts:
        p_idx, q_idx, k_idx, values = (np.concatenate(col) for col in zip(*parts))
    else:
        p_idx = q_idx = k_idx = np.zeros(0, dtype=np.int32)
        values = np.zeros(0)
    table = InteractionTable(basis, p_idx, q_idx, k_idx, values.astype(np.float64))
    logger.info("Interaction table N=%d: %d entries", basis.max_index, len(table))
    return table


def table_stats(table: InteractionTable) -> Dict[str, float]:
    d = table.basis.d
    return {
        "max_index": table.basis.max_index,
        "dimension": d,
        "entries": len(table),
        "density": len(table) / float(max(d ** 3, 1)),
        "max_abs": float(np.max(np.abs(table.values))) if len(table) else 0.0,
    }


# ---------------------------------------------------------------------------
# Growth bound
# ---------------------------------------------------------------------------

def _log_mfact(a1, a2) -> np.ndarray:
    # multi-index factorial; negative components are clamped to 0! = 1
    return gammaln(np.maximum(a1, 0) + 1.0) + gammaln(np.maximum(a2, 0) + 1.0)


def growth_bound(p, q, k) -> float:
    """p! q! / ((p+q-1-k)!^2 (q-p-1+k)!^2 k!) with multi-index factorials."""
    p, q, k = as_index(p), as_index(q), as_index(k)
    log_b = (_log_mfact(p.k1, p.k2) + _log_mfact(q.k1, q.k2)
             - 2 * _log_mfact(p.k1 + q.k1 - 1 - k.k1, p.k2 + q.k2 - 1 - k.k2)
             - 2 * _log_mfact(q.k1 - p.k1 - 1 + k.k1, q.k2 - p.k2 - 1 + k.k2)
             - _log_mfact(k.k1, k.k2))
    return float(np.exp(log_b))


def growth_ratios(table: InteractionTable) -> np.ndarray:
    """A^2 / growth_bound for every stored entry."""
    return np.array([a * a / growth_bound(p, q, k) for p, q, k, a in table.entries()])


def fit_growth_constant(table: InteractionTable) -> float:
    ratios = growth_ratios(table)
    return float(ratios.max()) if ratios.size else 0.0


def growth_excess(table: InteractionTable, constant: float) -> float:
    """Largest A^2 / (constant * growth_bound) over the table; at most 1 when the constant covers it."""
    if constant <= 0 or not math.isfinite(constant):
        raise InvalidArgumentError(f"growth constant must be positive and finite, got {constant}")
    ratios = growth_ratios(table)
    return float(ratios.max()) / constant if ratios.size else 0.0


# ---------------------------------------------------------------------------
# Binary cache
# ---------------------------------------------------------------------------

def save_table(table: InteractionTable, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    basis = table.basis
    records = np.zeros(len(table), dtype=_RECORD)
    records["p1"] = basis.k1[table.p_idx]
    records["p2"] = basis.k2[table.p_idx]
    records["q1"] = basis.k1[table.q_idx]
    records["q2"] = basis.k2[table.q_idx]
    records["k1"] = basis.k1[table.k_idx]
    records["k2"] = basis.k2[table.k_idx]
    records["value"] = table.values
    with open(path, "wb") as f:
        f.write(_HEADER.pack(CACHE_MAGIC, basis.max_index, CONVENTION_TAG))
        f.write(records.tobytes())
    return path


def load_table(path: Union[str, Path], basis: GalerkinBasis) -> Optional[InteractionTable]:
    """Read a cached table; None when the file is missing, stale or built for another basis."""
    path = Path(path)
    if not path.exists():
        return None
    raw = path.read_bytes()
    if len(raw) < _HEADER.size:
        logger.warning("Ignoring truncated table cache %s", path)
        return None
    magic, max_index, tag = _HEADER.unpack_from(raw)
    if magic != CACHE_MAGIC or tag != CONVENTION_TAG or max_index != basis.max_index:
        logger.info("Table cache %s invalidated (magic=%r, N=%d, tag=%d)", path, magic, max_index, tag)
        return None
    records = np.frombuffer(raw[_HEADER.size:], dtype=_RECORD)
    pos = np.full((basis.max_index + 1, basis.max_index + 1), -1, dtype=np.int64)
    pos[basis.k1, basis.k2] = np.arange(basis.d)
    return InteractionTable(
        basis,
        pos[records["p1"], records["p2"]].astype(np.int32),
        pos[records["q1"], records["q2"]].astype(np.int32),
        pos[records["k1"], records["k2"]].astype(np.int32),
        records["value"].astype(np.float64),
    )


def cached_table(basis: GalerkinBasis, cache_dir: Optional[Union[str, Path]] = None, threads: int = 1) -> InteractionTable:
    if cache_dir is None:
        return build_table(basis, threads=threads)
    path = Path(cache_dir) / f"table_N{basis.max_index}.oue"
    table = load_table(path, basis)
    if table is None:
        table = build_table(basis, threads=threads)
        save_table(table, path)
    return table
