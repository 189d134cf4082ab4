"""
verify-hermite, verify-coeffs and verify-field: each closed form against an
independent computation (quadrature oracle or finite differences).
"""

import math

import numpy as np
import pandas as pd

from ..config import settings
from ..domain import GalerkinBasis, GaussianParams, MeasureParams, NormalizationMode
from ..exporter import DataExporter
from ..schemas import Command
from ..services import coeffs, field, hermite, measure
from ..services.errors import ResourceBudgetError
from .base import CommandRun

GROWTH_FIT_N = 8
REGULARITY_LADDER = (4, 6, 8)


def register(subparsers, parents):
    subparsers.add_parser(Command.VERIFY_HERMITE.value, parents=parents,
                          help="Check orthonormality, eigenrelations and derivative rules of H_k^c")
    subparsers.add_parser(Command.VERIFY_COEFFS.value, parents=parents,
                          help="Check the closed-form interaction coefficients against quadrature")
    subparsers.add_parser(Command.VERIFY_FIELD.value, parents=parents,
                          help="Check the Galerkin field, its derivatives and its divergence")


def _points(c: float, count: int, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    return rng.standard_normal((count, 2)) / math.sqrt(c)


# ---------------------------------------------------------------------------
# verify-hermite
# ---------------------------------------------------------------------------

def verify_hermite(run: CommandRun):
    cfg = run.config
    n = cfg.N
    basis = GalerkinBasis.box(n)
    rows = []
    for c in cfg.c_values or [cfg.c]:
        params = GaussianParams(c)
        tag = f"[c={c:g}]"
        pts = _points(c, 64, cfg.seed)
        x = pts[:, 0]
        run.log(f"Hermite checks at c={c:g}, N={n}")

        measured = {
            "orthonormality": hermite.orthonormality_deviation(basis, params),
            "eigenrelation": hermite.eigenrelation_residual(basis, params, pts),
            "recurrence": hermite.recurrence_residual(2 * n, params, x),
            "derivative": hermite.derivative_residual(2 * n, params, x),
        }
        tolerances = {"orthonormality": 1e-10, "eigenrelation": 1e-8, "recurrence": 1e-10, "derivative": 1e-5}

        worst = 0.0
        for a in range(n + 1):
            for b in range(n + 1):
                for r in range(min(a, b) + 1):
                    exact = coeffs.theta(a, b, r)
                    got = hermite.product_projection(a, b, a + b - 2 * r, params)
                    worst = max(worst, abs(got - exact) / max(1.0, abs(exact)))
        measured["product_expansion"] = worst
        tolerances["product_expansion"] = 1e-8

        measured["hermite_function_relation"] = max(
            hermite.hermite_relation_residual(k, params, pts) for k in basis.indices
        )
        tolerances["hermite_function_relation"] = 1e-8

        paper = GaussianParams(c, NormalizationMode.PAPER)
        rule = hermite.quadrature_rule(hermite.quadrature_order(2 * n), paper)
        measured["paper_weight_total"] = abs(float(np.sum(rule.weights)) ** 2 - hermite.weight_total(paper)) * c
        tolerances["paper_weight_total"] = 1e-12

        for name, value in measured.items():
            run.check_at_most(f"{name}{tag}", value, tolerances[name])
            rows.append({"c": c, "N": n, "check": name, "measured": value, "tolerance": tolerances[name]})

    run.csv("hermite_checks.csv", pd.DataFrame(rows))

    c = (cfg.c_values or [cfg.c])[0]
    params = GaussianParams(c)
    xs = np.linspace(-3.0 / math.sqrt(c), 3.0 / math.sqrt(c), 401)
    table = hermite.hermite_table(min(n, 5), c, xs)
    series = {f"H_{i}": (xs, table[i]) for i in range(table.shape[0])}
    DataExporter.plot_series(series, run.path("hermite_polynomials.svg"),
                             title=f"Hermite polynomials, c={c:g}", xlabel="x", ylabel="H_n^c(x)")


# ---------------------------------------------------------------------------
# verify-coeffs
# ---------------------------------------------------------------------------

def _tensor_budget(basis: GalerkinBasis):
    # closed form, oracle, mask and two intermediates of d^3 doubles each
    required = 5 * basis.d ** 3 * 8 / 1e6
    if required > settings.TABLE_BUDGET_MB:
        raise ResourceBudgetError(basis.max_index, required, settings.TABLE_BUDGET_MB)


def verify_coeffs(run: CommandRun):
    cfg = run.config
    params = run.params
    n_check = max(cfg.N, 8)
    big = GalerkinBasis.box(n_check)
    _tensor_budget(big)
    run.log(f"Comparing closed-form A against quadrature on the N={n_check} box (d={big.d})")

    closed = coeffs.closed_form_tensor(big)
    oracle = coeffs.oracle_tensor(big, params)
    mask = coeffs.admissible_mask(big)
    rel = np.abs(closed - oracle) / np.maximum(np.abs(oracle), 1.0)
    run.check_at_most("closed_form_vs_quadrature", float(rel[mask].max()), 1e-8,
                      detail=f"{int(mask.sum())} admissible triples")
    scale = max(1.0, float(np.abs(oracle).max()))
    run.check_at_most("vanishing_outside_support", float(np.abs(oracle[~mask]).max(initial=0.0)) / scale, 1e-10)
    run.check_at_most("antisymmetry", float(np.abs(closed + closed.transpose(1, 0, 2)).max()), 1e-12)

    basis = GalerkinBasis.box(cfg.N)
    table = coeffs.build_table(basis, threads=run.threads)
    small = coeffs.closed_form_tensor(basis)[table.p_idx, table.q_idx, table.k_idx]
    run.check_at_most("table_matches_closed_form",
                      float((np.abs(table.values - small) / np.maximum(np.abs(small), 1.0)).max(initial=0.0)), 1e-13)

    cache_path = coeffs.save_table(table, run.path(f"table_N{cfg.N}.oue"))
    reloaded = coeffs.load_table(cache_path, basis)
    identical = (reloaded is not None and len(reloaded) == len(table)
                 and np.array_equal(reloaded.values, table.values)
                 and np.array_equal(reloaded.p_idx, table.p_idx)
                 and np.array_equal(reloaded.k_idx, table.k_idx))
    run.check("table_cache_round_trip", identical, detail=str(cache_path.name))

    stats = coeffs.table_stats(table)
    ratios = coeffs.growth_ratios(table)
    fit_basis = GalerkinBasis.box(GROWTH_FIT_N)
    fit_table = table if cfg.N == GROWTH_FIT_N else coeffs.cached_table(fit_basis, cfg.table_cache, run.threads)
    constant = coeffs.fit_growth_constant(fit_table)
    excess = coeffs.growth_excess(table, constant)
    stats["growth_constant"] = constant
    stats["growth_constant_box"] = GROWTH_FIT_N
    stats["growth_excess"] = excess
    run.report["table"] = stats
    run.check_at_most("growth_bound_frozen_constant", excess, 1.0 + 1e-12,
                      detail=f"C={constant:.6g} fitted once on N={GROWTH_FIT_N}, applied to N={cfg.N}")
    run.log(f"Table N={cfg.N}: {stats['entries']} entries, A^2 / (C bound) at most {excess:.6g}")

    idx = basis.indices
    frame = pd.DataFrame({
        "p1": [idx[i].k1 for i in table.p_idx], "p2": [idx[i].k2 for i in table.p_idx],
        "q1": [idx[i].k1 for i in table.q_idx], "q2": [idx[i].k2 for i in table.q_idx],
        "k1": [idx[i].k1 for i in table.k_idx], "k2": [idx[i].k2 for i in table.k_idx],
        "value": table.values,
        "growth_ratio": ratios,
    })
    run.csv("interaction_table.csv", frame)
    if ratios.size:
        DataExporter.plot_histogram(np.log10(np.maximum(ratios, 1e-300)), run.path("growth_ratios.svg"),
                                    title=f"A^2 / growth bound, N={cfg.N}", xlabel="log10 ratio")


# ---------------------------------------------------------------------------
# verify-field
# ---------------------------------------------------------------------------

def _unit(basis: GalerkinBasis, i: int) -> np.ndarray:
    e = np.zeros(basis.d, dtype=np.complex128)
    e[i] = 1.0
    return e


def verify_field(run: CommandRun):
    cfg = run.config
    ctx = run.context(cfg.N)
    basis = ctx.basis
    mp = MeasureParams(gamma=cfg.gamma, params=run.params, basis=basis, seed=cfg.seed)
    phis = measure.sample(mp, 3).fields
    rng = np.random.default_rng(cfg.seed)
    rows = []

    oracle_err = grad_err = second_err = 0.0
    h = 1e-4
    for m, phi in enumerate(phis):
        b = field.vector_field(ctx, phi).coeffs
        ref = field.oracle_vector_field(ctx, phi).coeffs
        err = float(np.max(np.abs(b - ref)) / max(1.0, float(np.max(np.abs(ref)))))
        oracle_err = max(oracle_err, err)

        g = field.gradient_matrix(ctx, phi)
        fd = np.empty_like(g)
        for j in range(basis.d):
            e = _unit(basis, j)
            plus = field.vector_field_batch(ctx, phi.coeffs + h * e)[0]
            minus = field.vector_field_batch(ctx, phi.coeffs - h * e)[0]
            fd[:, j] = (plus - minus) / (2 * h)
        gerr = float(np.max(np.abs(g - fd)) / max(1.0, float(np.max(np.abs(g)))))
        grad_err = max(grad_err, gerr)

        div = field.divergence(ctx, phi)
        rows.append({"field": m, "oracle_error": err, "gradient_error": gerr, "divergence": div,
                     "hs_norm": field.hs_norm(ctx, phi), "enstrophy": field.enstrophy(phi)})

    positive = [i for i, k in enumerate(basis.indices) if k.order > 0]
    n_triples = min(300, basis.d * basis.d * len(positive))
    for _ in range(n_triples):
        i, j = rng.integers(basis.d, size=2)
        k = positive[int(rng.integers(len(positive)))]
        gi_plus = field.gradient_matrix(ctx, phis[0].with_coeffs(phis[0].coeffs + h * _unit(basis, i)))
        gi_minus = field.gradient_matrix(ctx, phis[0].with_coeffs(phis[0].coeffs - h * _unit(basis, i)))
        fd = (gi_plus[k, j] - gi_minus[k, j]) / (2 * h)
        exact = field.second_gradient_entry(ctx, basis.indices[i], basis.indices[j], basis.indices[k])
        second_err = max(second_err, abs(fd - exact) / max(1.0, abs(exact)))

    run.check_at_most("field_vs_quadrature", oracle_err, 1e-8)
    run.check_at_most("gradient_vs_finite_difference", grad_err, 1e-6)
    run.check_at_most("second_gradient_vs_finite_difference", float(second_err), 1e-6,
                      detail=f"{n_triples} random triples")

    small = run.context(min(3, cfg.N))
    phi3 = phis[0].embed(small.basis)
    exact_div = field.divergence(small, phi3)
    brute = field.bruteforce_divergence(small, phi3)
    run.check_at_most("divergence_vs_finite_difference", abs(exact_div - brute) / max(1.0, abs(exact_div)), 1e-4)

    paper = field.divergence_paper_form(ctx, phis[0])
    run.check_at_most("divergence_forms_reconciled", float(paper["discrepancy"]), 1e-10 * max(1.0, abs(paper["real_divergence"])))
    run.log(f"Complex-coordinate total {paper['complex_total']:.6g} vs real divergence {paper['real_divergence']:.6g}")
    run.report["divergence_forms"] = paper

    single = 0.0
    for i in range(basis.d):
        single = max(single, float(np.max(np.abs(field.vector_field_batch(ctx, _unit(basis, i))))))
    run.check_at_most("single_mode_stationary", single, 1e-12)

    ladder = measure.regularity_ladder([run.context(n) for n in REGULARITY_LADDER], max(cfg.M, 2), cfg.seed,
                                       beta=2.0, threads=run.threads)
    run.report["moment_regularity"] = ladder
    for n, reg in ladder["per_N"].items():
        run.check(f"field_second_moment_finite_N{n}", math.isfinite(reg["estimate"]), reg["estimate"],
                  detail=f"SE {reg['standard_error']:.3g}")
    run.check("moment_regularity_ladder", ladder["finite"], ladder["spread"],
              detail="E||B||^2_2 " + ", ".join(f"N={n}: {r['estimate']:.4g}" for n, r in ladder["per_N"].items()))

    run.csv("field_checks.csv", pd.DataFrame(rows))


HANDLERS = {
    Command.VERIFY_HERMITE: verify_hermite,
    Command.VERIFY_COEFFS: verify_coeffs,
    Command.VERIFY_FIELD: verify_field,
}
