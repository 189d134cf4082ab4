"""
sample, moments and dispersive: draws from the Gibbs-type measure, their moments
against closed forms, and the Hermite-function norm ladders.
"""

import math

import numpy as np
import pandas as pd

from ..domain import GalerkinBasis, GaussianParams, MeasureParams
from ..exporter import DataExporter
from ..schemas import Command
from ..services import measure
from .base import CommandRun

SE_BAND = 4.0


def register(subparsers, parents):
    p = subparsers.add_parser(Command.SAMPLE.value, parents=parents,
                              help="Draw coefficient samples from the Gibbs-type measure")
    p.add_argument("--real-mode", dest="real_mode", action="store_true", default=None,
                   help="Draw real coefficients only")
    p.add_argument("--p", dest="p", type=float, default=None, help="Exponent of the L^p_loc diagnostic")

    p = subparsers.add_parser(Command.MOMENTS.value, parents=parents,
                              help="Compare sample moments with their closed forms")
    p.add_argument("--epsilon", type=float, default=None, help="Sobolev index of the negative-norm moment")
    p.add_argument("--lambda", dest="lam", type=float, default=None, help="Exponential moment parameter")

    p = subparsers.add_parser(Command.DISPERSIVE.value, parents=parents,
                              help="Fit decay exponents of Hermite-function norms")
    p.add_argument("--p", dest="p", type=float, default=None, help="Lebesgue exponent in [2, 10/3]")
    p.add_argument("--max-index", dest="max_index", type=int, default=None, help="Largest diagonal order 2n")


def _measure(run: CommandRun, basis: GalerkinBasis, real_mode: bool = False, gamma=None, c=None) -> MeasureParams:
    cfg = run.config
    params = run.params if c is None else GaussianParams(c, cfg.normalization)
    return MeasureParams(gamma=cfg.gamma if gamma is None else gamma, params=params, basis=basis,
                         seed=cfg.seed, real_mode=real_mode)


def _within_band(run: CommandRun, name: str, estimate: float, exact: float, se: float) -> bool:
    z = abs(estimate - exact) / se if se > 0 else float("inf")
    return run.check(name, z <= SE_BAND, z, SE_BAND, detail=f"estimate {estimate:.6g}, exact {exact:.6g}, SE {se:.3g}")


# ---------------------------------------------------------------------------
# sample
# ---------------------------------------------------------------------------

def sample(run: CommandRun):
    cfg = run.config
    basis = GalerkinBasis.box(cfg.N)
    mp = _measure(run, basis, real_mode=cfg.real_mode)
    batch = measure.sample(mp, cfg.M, threads=run.threads)
    run.log(f"Drew {len(batch)} samples on N={cfg.N} (d={basis.d}), real_mode={cfg.real_mode}")
    run.csv("samples.csv", measure.samples_to_frame(batch).reset_index())

    column = batch.coeffs[:, basis.position((1, 1))]
    m = len(batch)
    for part, values in (("re", column.real), ("im", column.imag)):
        if part == "im" and cfg.real_mode:
            run.check("mean_phi_1_1_im", bool(np.all(values == 0.0)), float(np.max(np.abs(values))), 0.0)
            continue
        se = float(np.std(values, ddof=1) / math.sqrt(m))
        _within_band(run, f"mean_phi_1_1_{part}", float(np.mean(values)), 0.0, se)

    second = np.abs(column) ** 2
    per_axis = 1.0 / (cfg.gamma * (1.0 + 2 * cfg.c) ** 2)
    exact = per_axis if cfg.real_mode else 2.0 * per_axis
    _within_band(run, "second_moment_phi_1_1", float(np.mean(second)), exact,
                 float(np.std(second, ddof=1) / math.sqrt(m)))

    p_support = cfg.p if measure.P_SUPPORT_LOW < cfg.p < measure.P_SUPPORT_HIGH else 3.0
    R = 2.0 / math.sqrt(cfg.c)
    diagnostic = measure.support_diagnostic(cfg.gamma, cfg.c, [cfg.N, cfg.N + 2], p_support, R,
                                            M=min(cfg.M, 32), seed=cfg.seed, threads=run.threads)
    run.check("support_diagnostic_finite", all(math.isfinite(r["mean"]) for r in diagnostic))
    run.report["support_diagnostic"] = diagnostic
    run.json("seed_path.json", batch.seed_path)


# ---------------------------------------------------------------------------
# moments
# ---------------------------------------------------------------------------

def _combinations(run: CommandRun):
    cfg = run.config
    basis = GalerkinBasis.box(cfg.N)
    modes = sorted(basis.indices, key=lambda k: (k.order, k.k1))[:5]
    settings_pairs = [(cfg.gamma, cfg.c), (2.0 * cfg.gamma, cfg.c / 2.0)]
    return basis, [(k, g, c) for g, c in settings_pairs for k in modes]


def moments(run: CommandRun):
    cfg = run.config
    basis, combos = _combinations(run)
    rows = []
    for k, gamma, c in combos:
        mp = _measure(run, basis, gamma=gamma, c=c)
        for r in (1, 2, 3):
            res = measure.moment_check(mp, k, r, max(cfg.M, 100), threads=run.threads)
            name = f"moment_k{k.label()}_r{r}_gamma{gamma:g}_c{c:g}"
            run.check(name, res["z_score"] <= SE_BAND, res["z_score"], SE_BAND)
            rows.append({"label": name, "k1": k.k1, "k2": k.k2, "r": r, "gamma": gamma, "c": c,
                         "estimate": res["estimate"], "exact": res["exact"],
                         "standard_error": res["standard_error"], "z_score": res["z_score"]})
    frame = pd.DataFrame(rows)
    run.csv("moments.csv", frame)
    first = frame[frame["r"] == 1]
    DataExporter.plot_estimates(first["label"].tolist(), first["estimate"].tolist(),
                                first["standard_error"].tolist(), run.path("moments.svg"),
                                title="E|phi_k|^2 against closed form", reference=first["exact"].tolist())

    mp = _measure(run, basis)
    sob = measure.sobolev_moment_check(mp, cfg.epsilon, max(cfg.M, 2), threads=run.threads)
    _within_band(run, f"sobolev_moment_eps{cfg.epsilon:g}", sob["estimate"], sob["exact"], sob["standard_error"])
    run.report["sobolev_moment"] = sob

    ctx = run.context(cfg.N)
    low = measure.exponential_moment_check(ctx, mp, cfg.lam, max(cfg.M, 8), threads=run.threads)
    high = measure.exponential_moment_check(ctx, mp, 2.0 * cfg.lam, max(cfg.M, 8), threads=run.threads)
    run.report["exponential_moments"] = [low, high]
    run.check("exponential_moment_finite", low["status"] == "finite", detail=low["status"])
    if low["status"] == "finite" and high["status"] == "finite":
        for key in ("divergence", "hs_norm"):
            a = low[key]["estimate"]
            b = high[key]["estimate"]
            run.check(f"exponential_moment_monotone_{key}", b >= a, b - a, 0.0,
                      detail=f"lambda={cfg.lam:g}: {a:.6g}, lambda={2 * cfg.lam:g}: {b:.6g}")
    else:
        run.log(f"Exponential moment at lambda={2 * cfg.lam:g}: {high['status']}")


# ---------------------------------------------------------------------------
# dispersive
# ---------------------------------------------------------------------------

SLOPE_SLACK = 0.05


def dispersive(run: CommandRun):
    cfg = run.config
    single = measure.dispersive_exponent(cfg.p, cfg.max_index)
    product = measure.dispersive_product_exponent(cfg.max_index)
    flat = measure.dispersive_exponent(2.0, cfg.max_index)

    run.check("dispersive_slope", single["slope"] <= single["theoretical_slope"] + SLOPE_SLACK,
              single["slope"], single["theoretical_slope"] + SLOPE_SLACK,
              detail=f"p={cfg.p:g}, 95% CI [{single['ci_low']:.4f}, {single['ci_high']:.4f}]")
    run.check("dispersive_product_slope", product["slope"] <= product["theoretical_slope"] + SLOPE_SLACK,
              product["slope"], product["theoretical_slope"] + SLOPE_SLACK,
              detail=f"95% CI [{product['ci_low']:.4f}, {product['ci_high']:.4f}]")
    run.check_at_most("l2_slope_vanishes", abs(flat["slope"]), SLOPE_SLACK)

    run.csv("dispersive.csv", pd.DataFrame({
        "n": single["indices"],
        "eigenvalue": single["eigenvalues"],
        f"norm_L{cfg.p:g}": single["norms"],
        "norm_product_L5/3": product["norms"],
        "norm_L2": flat["norms"],
    }))
    run.report["fits"] = {"single": single, "product": product, "l2": flat}
    DataExporter.plot_ladder(single["eigenvalues"], single["norms"], run.path("dispersive.svg"),
                             title=f"||h_(n,n)||_L^{cfg.p:.3g} along the diagonal", xlabel="lambda_(n,n)",
                             ylabel="norm", fit=single)
    DataExporter.plot_ladder(product["eigenvalues"], product["norms"], run.path("dispersive_product.svg"),
                             title="||h_(n,n) h_(n,n)||_L^5/3", xlabel="lambda_(n,n)", ylabel="norm",
                             fit=product)


HANDLERS = {
    Command.SAMPLE: sample,
    Command.MOMENTS: moments,
    Command.DISPERSIVE: dispersive,
}
