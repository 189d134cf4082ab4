"""
Sampling from the Galerkin Gibbs-type measure mu^n and the diagnostics built on it.

Under mu^n the coefficients are independent with

    phi_k = (xi_k + i eta_k) / (1 + c|k|),    xi_k, eta_k ~ N(0, 1/gamma)

so E|phi_k|^2 = 2 / (gamma (1+c|k|)^2). Every draw is a function of
(seed, k, sample index) alone: samples are cut into fixed blocks and each
(mode, block) pair owns its own SeedSequence.
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from typing import Dict, List, Optional, Sequence

import numpy as np
import pandas as pd
from scipy import stats
from scipy.integrate import trapezoid
from scipy.special import gammaln, roots_legendre

from ..config import settings
from ..domain import FieldContext, GalerkinBasis, GaussianParams, MeasureParams, SampleBatch, SpectralField, as_index
from . import field as fieldops
from . import hermite
from .errors import InvalidArgumentError, ResolutionError

logger = logging.getLogger(__name__)

P_SUPPORT_LOW = 2.0
P_SUPPORT_HIGH = 10.0 / 3.0


# ---------------------------------------------------------------------------
# Sampling
# ---------------------------------------------------------------------------

def _block_normals(seed: int, k1: int, k2: int, block: int) -> np.ndarray:
    rng = np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(k1, k2, block)))
    return rng.standard_normal((2, settings.SAMPLE_BLOCK))


def _sample_block(mp: MeasureParams, block: int) -> np.ndarray:
    basis = mp.basis
    c = mp.params.c
    scale = 1.0 / math.sqrt(mp.gamma)
    out = np.empty((settings.SAMPLE_BLOCK, basis.d), dtype=np.complex128)
    for i, k in enumerate(basis.indices):
        z = _block_normals(mp.seed, k.k1, k.k2, block) * scale
        imag = 0.0 if mp.real_mode else z[1]
        out[:, i] = (z[0] + 1j * imag) / (1.0 + c * k.order)
    return out


def sample(mp: MeasureParams, count: int, threads: int = 1) -> SampleBatch:
    if count < 1:
        raise InvalidArgumentError(f"sample count must be >= 1, got {count}")
    block = settings.SAMPLE_BLOCK
    n_blocks = (count + block - 1) // block
    if threads > 1 and n_blocks > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(lambda b: _sample_block(mp, b), range(n_blocks)))
    else:
        parts = [_sample_block(mp, b) for b in range(n_blocks)]
    coeffs = np.concatenate(parts, axis=0)[:count]
    seed_path = {
        "seed": mp.seed,
        "scheme": "SeedSequence(seed, spawn_key=(k1, k2, block))",
        "block_size": block,
        "blocks": n_blocks,
        "real_mode": mp.real_mode,
    }
    logger.debug("Sampled %d fields on N=%d (seed=%d)", count, mp.basis.max_index, mp.seed)
    return SampleBatch(basis=mp.basis, c=mp.params.c, coeffs=coeffs, seed_path=seed_path)


def samples_to_frame(batch: SampleBatch) -> pd.DataFrame:
    """One row per sample, Re/Im columns per mode named after the multi-index."""
    columns = {}
    for i, k in enumerate(batch.basis.indices):
        columns[f"re_{k.label()}"] = batch.coeffs[:, i].real
        columns[f"im_{k.label()}"] = batch.coeffs[:, i].imag
    frame = pd.DataFrame(columns)
    frame.index.name = "sample"
    return frame


def _mean_se(values: np.ndarray):
    m = values.shape[0]
    mean = float(np.mean(values))
    se = float(np.std(values, ddof=1) / math.sqrt(m)) if m > 1 else float("nan")
    return mean, se


# ---------------------------------------------------------------------------
# Moments
# ---------------------------------------------------------------------------

def exact_moment(k, r: int, gamma: float, c: float) -> float:
    """E|phi_k|^{2r} = 2^r r! / (gamma^r (1+c|k|)^{2r})."""
    k = as_index(k)
    return float(math.exp(r * math.log(2.0) + gammaln(r + 1) - r * math.log(gamma)
                          - 2 * r * math.log1p(c * k.order)))


def moment_check(mp: MeasureParams, k, r: int, M: int, threads: int = 1) -> Dict[str, float]:
    if r < 1:
        raise InvalidArgumentError(f"moment order r must be >= 1, got {r}")
    if M < 100:
        raise InvalidArgumentError(f"moment check needs M >= 100 samples, got {M}")
    k = as_index(k)
    batch = sample(mp, M, threads=threads)
    values = np.abs(batch.coeffs[:, mp.basis.position(k)]) ** (2 * r)
    estimate, se = _mean_se(values)
    exact = exact_moment(k, r, mp.gamma, mp.params.c)
    return {
        "k": list(k),
        "r": r,
        "gamma": mp.gamma,
        "c": mp.params.c,
        "estimate": estimate,
        "exact": exact,
        "standard_error": se,
        "z_score": abs(estimate - exact) / se if se > 0 else float("inf"),
    }


def sobolev_moment_check(mp: MeasureParams, epsilon: float, M: int, threads: int = 1) -> Dict[str, float]:
    """E ||phi||^2_{-eps} against (2/gamma) sum_k (1+c|k|)^{-2-eps}."""
    if epsilon <= 0:
        raise InvalidArgumentError(f"epsilon must be positive, got {epsilon}")
    batch = sample(mp, M, threads=threads)
    weights = (1.0 + mp.params.c * mp.basis.orders) ** (-epsilon)
    values = np.sum(weights * np.abs(batch.coeffs) ** 2, axis=1)
    estimate, se = _mean_se(values)
    exact = 2.0 / mp.gamma * float(np.sum((1.0 + mp.params.c * mp.basis.orders) ** (-2.0 - epsilon)))
    return {
        "epsilon": epsilon,
        "estimate": estimate,
        "exact": exact,
        "standard_error": se,
        "z_score": abs(estimate - exact) / se if se > 0 else float("inf"),
    }


# ---------------------------------------------------------------------------
# L^p_loc and support diagnostic
# ---------------------------------------------------------------------------

def _polar_lp(phi: SpectralField, p: float, R: float, n_radial: int, n_angular: int) -> float:
    r, wr = roots_legendre(n_radial)
    r = 0.5 * R * (r + 1.0)
    wr = 0.5 * R * wr
    theta = 2.0 * math.pi * np.arange(n_angular) / n_angular
    wt = 2.0 * math.pi / n_angular
    rr, tt = np.meshgrid(r, theta, indexing="ij")
    pts = np.stack([rr * np.cos(tt), rr * np.sin(tt)], axis=-1)
    values = np.abs(hermite.eval_field(phi, pts)) ** p
    integral = float(np.sum(values * (wr * r)[:, None]) * wt)
    return integral ** (1.0 / p)


def lp_loc_norm(phi: SpectralField, p: float, R: float, n_radial: int = 256, n_angular: int = 256,
                check: bool = False) -> float:
    """(int_{|x|<R} |phi|^p dx)^{1/p} on a Gauss-Legendre x uniform polar grid."""
    if not (R > 0):
        raise InvalidArgumentError(f"disc radius must be positive, got {R}")
    if not (P_SUPPORT_LOW < p < P_SUPPORT_HIGH):
        logger.warning("p=%.4g lies outside the support range (2, 10/3); computing anyway", p)
    value = _polar_lp(phi, p, R, n_radial, n_angular)
    if check:
        fine = _polar_lp(phi, p, R, 2 * n_radial, 2 * n_angular)
        if abs(fine - value) > 1e-6 * max(abs(fine), 1.0):
            logger.warning("L^p_loc grid-doubling disagreement %.3g at R=%.4g", abs(fine - value), R)
        value = fine
    return value


def support_diagnostic(gamma: float, c: float, max_indices: Sequence[int], p: float, R: float,
                       M: int, seed: int = 0, threads: int = 1) -> List[Dict[str, float]]:
    """Monte Carlo mean of the L^p_loc norm for growing truncations."""
    params = GaussianParams(c)
    rows = []
    for n in max_indices:
        mp = MeasureParams(gamma=gamma, params=params, basis=GalerkinBasis.box(n), seed=seed)
        batch = sample(mp, M, threads=threads)
        norms = np.array([lp_loc_norm(phi, p, R, n_radial=64, n_angular=64) for phi in batch.fields])
        mean, se = _mean_se(norms)
        rows.append({"N": n, "mean": mean, "standard_error": se, "p": p, "R": R})
        logger.info("Support diagnostic N=%d: mean L^%.3g_loc norm %.6g +- %.2g", n, p, mean, se)
    return rows


# ---------------------------------------------------------------------------
# Dispersive bounds
# ---------------------------------------------------------------------------

def theoretical_slope(p: float, product: bool = False) -> float:
    """(theta-1)/6 with 1/p = theta/2 + (1-theta)*3/10; doubled for the product h_n h_n."""
    theta = (1.0 / p - 0.3) / 0.2
    slope = (theta - 1.0) / 6.0
    return 2.0 * slope if product else slope


def _hermite_function_lp_1d(n: int, p: float, points: int) -> float:
    half = math.sqrt(2 * n + 1) + 10.0
    x = np.linspace(-half, half, points)
    h = hermite.hermite_function_1d(n, x)
    return float(trapezoid(np.abs(h) ** p, x)) ** (1.0 / p)


def diagonal_lp_norm(n: int, p: float, points: Optional[int] = None) -> float:
    """
    ||h_(n,n)||_{L^p(R^2)} = ||h_n||_{L^p(R)}^2, checked by doubling the uniform grid.
    """
    if points is None:
        points = 2001 + 100 * n
    coarse = _hermite_function_lp_1d(n, p, points)
    fine = _hermite_function_lp_1d(n, p, 2 * points - 1)
    if abs(fine - coarse) > 1e-4 * max(fine, 1e-300):
        raise ResolutionError(
            f"L^{p:.4g} norm of h_{n} unresolved (coarse {coarse:.8g}, fine {fine:.8g})", where=float(n)
        )
    return fine ** 2


def _fit_slope(ladder: np.ndarray, norms: np.ndarray, p: float, product: bool) -> Dict[str, object]:
    lam = np.sqrt(2.0 * (2 * ladder + 1))
    fit = stats.linregress(np.log(lam), np.log(norms))
    half_width = 1.96 * float(fit.stderr)
    return {
        "p": p,
        "product": product,
        "indices": [int(n) for n in ladder],
        "eigenvalues": lam.tolist(),
        "norms": norms.tolist(),
        "slope": float(fit.slope),
        "intercept": float(fit.intercept),
        "ci_low": float(fit.slope) - half_width,
        "ci_high": float(fit.slope) + half_width,
        "theoretical_slope": theoretical_slope(p, product),
    }


def _ladder(max_index: int) -> np.ndarray:
    if max_index < 10:
        raise InvalidArgumentError(f"dispersive ladder needs max_index >= 10, got {max_index}")
    # diagonal (n, n) has |k| = 2n
    return np.arange(1, max_index // 2 + 1)


def dispersive_exponent(p: float, max_index: int) -> Dict[str, object]:
    """Slope of log ||h_(n,n)||_{L^p} against log lambda_(n,n) along the diagonal."""
    if not (2.0 <= p <= P_SUPPORT_HIGH + 1e-12):
        raise InvalidArgumentError(f"p must lie in (2, 10/3], got {p}")
    if p == 2.0:
        logger.info("p=2 is a diagnostic run: the slope should vanish")
    ladder = _ladder(max_index)
    norms = np.array([diagonal_lp_norm(int(n), p) for n in ladder])
    return _fit_slope(ladder, norms, p, product=False)


def dispersive_product_exponent(max_index: int, p: float = 5.0 / 3.0) -> Dict[str, object]:
    """Slope of ||h_(n,n) h_(n,n)||_{L^p}; equals ||h_(n,n)||^2_{L^{2p}}."""
    ladder = _ladder(max_index)
    norms = np.array([diagonal_lp_norm(int(n), 2.0 * p) ** 2 for n in ladder])
    out = _fit_slope(ladder, norms, p, product=True)
    out["theoretical_slope"] = theoretical_slope(2.0 * p, product=True)
    return out


# ---------------------------------------------------------------------------
# Integrability hypotheses of the flow theorem
# ---------------------------------------------------------------------------

def _exp_estimate(values: np.ndarray, lam: float) -> Dict[str, object]:
    with np.errstate(over="ignore"):
        expo = np.exp(lam * values)
    if not np.all(np.isfinite(expo)):
        return {"estimate": None, "standard_error": None, "status": f"estimate diverged at lambda={lam:g}"}
    mean, se = _mean_se(expo)
    if not math.isfinite(mean):
        return {"estimate": None, "standard_error": None, "status": f"estimate diverged at lambda={lam:g}"}
    return {"estimate": mean, "standard_error": se, "status": "finite"}


def exponential_moment_check(ctx: FieldContext, mp: MeasureParams, lam: float, M: int,
                             threads: int = 1) -> Dict[str, object]:
    """
    E exp(lambda |div B|) and E exp(lambda ||grad B||_HS) under mu^n, reported on the
    nested prefixes M/4, M/2, M of one batch to show stability in the sample size.
    """
    if not (lam > 0):
        raise InvalidArgumentError(f"lambda must be positive, got {lam}")
    if mp.basis != ctx.basis:
        raise InvalidArgumentError("measure and field context use different bases")
    batch = sample(mp, M, threads=threads)
    div = np.abs(fieldops.divergence_batch(ctx, batch.coeffs))
    hs = fieldops.hs_norm_batch(ctx, batch.coeffs)
    ladder = []
    for size in sorted({max(2, M // 4), max(2, M // 2), M}):
        ladder.append({
            "n_samples": size,
            "divergence": _exp_estimate(div[:size], lam),
            "hs_norm": _exp_estimate(hs[:size], lam),
        })
    final = ladder[-1]
    diverged = final["divergence"]["estimate"] is None or final["hs_norm"]["estimate"] is None
    return {
        "lambda": lam,
        "n_samples": M,
        "divergence": final["divergence"],
        "hs_norm": final["hs_norm"],
        "ladder": ladder,
        "status": f"estimate diverged at lambda={lam:g}" if diverged else "finite",
    }


def regularity_ladder(contexts: Sequence[FieldContext], M: int, seed: int = 0, beta: float = 2.0,
                      threads: int = 1) -> Dict[str, object]:
    """E ||B(phi)||^2_beta under mu^n on each context's basis, with the spread of the estimates."""
    if not contexts:
        raise InvalidArgumentError("regularity ladder needs at least one basis")
    if M < 2:
        raise InvalidArgumentError(f"regularity ladder needs M >= 2 samples, got {M}")
    per_n = {}
    for ctx in contexts:
        mp = MeasureParams(gamma=ctx.gamma, params=ctx.params, basis=ctx.basis, seed=seed)
        per_n[ctx.basis.max_index] = fieldops.moment_regularity(ctx, sample(mp, M, threads=threads).coeffs, beta)
    estimates = np.array([r["estimate"] for r in per_n.values()])
    spread = float(estimates.max() / estimates.min()) if estimates.min() > 0 else float("inf")
    logger.debug("Regularity ladder over N=%s: spread %.4g", list(per_n), spread)
    return {"beta": beta, "per_N": per_n, "spread": spread,
            "finite": bool(np.all(np.isfinite(estimates)))}
