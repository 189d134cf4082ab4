"""
kernel-bounds and particle: the perturbative velocity kernel for bounded vorticity
and the particle flows it drives.
"""

import math

import numpy as np
import pandas as pd

from ..exporter import DataExporter
from ..schemas import Command
from ..services import flow, kernel
from .base import CommandRun

OSGOOD_LOG_DELTA = -math.exp(41.0)
OSGOOD_FLOOR = 40.0


def register(subparsers, parents):
    for command, help_text in (
        (Command.KERNEL_BOUNDS, "Check the kernel series terms against their bounds"),
        (Command.PARTICLE, "Run particle flows and the transport invariant study"),
    ):
        p = subparsers.add_parser(command.value, parents=parents, help=help_text)
        p.add_argument("--order", type=int, default=None, help="Number of series terms (1-3)")
        p.add_argument("--vorticity", choices=kernel.CATALOG + ("zero",), default=None, help="Catalog vorticity")
        p.add_argument("--amplitude", type=float, default=None)
        p.add_argument("--width", type=float, default=None)
        if command == Command.KERNEL_BOUNDS:
            p.add_argument("--pairs", type=int, default=None, help="Random pairs of the quasi-Lipschitz check")
        else:
            p.add_argument("--steps", type=int, default=None, help="RK4 steps of the particle flow")
            p.add_argument("--t-reverse", dest="t_reverse", type=float, default=None,
                           help="Horizon of the particle reversibility check")
            p.add_argument("--particle-tol", dest="particle_tol", type=float, default=None,
                           help="Monte Carlo tolerance of the particle velocity")


def _vorticity(run: CommandRun):
    cfg = run.config
    if cfg.vorticity == "zero":
        return kernel.zero_vorticity()
    return kernel.vorticity(cfg.vorticity, amplitude=cfg.amplitude, width=cfg.width)


def _probe_points(c: float) -> np.ndarray:
    return np.array([[0.5, 0.0], [1.0, 1.0], [2.0, -1.0], [0.0, 3.0]]) / math.sqrt(c)


# ---------------------------------------------------------------------------
# kernel-bounds
# ---------------------------------------------------------------------------

def kernel_bounds(run: CommandRun):
    cfg = run.config
    params = run.params
    data = _vorticity(run)
    samples = kernel.KernelSamples.draw(params, cfg.order, max(cfg.M, 2), cfg.seed)
    points = _probe_points(params.c)
    run.log(f"Kernel series for {data.name} (sup {data.sup_norm:.4g}), order {cfg.order}, M={samples.size}")

    rows = []
    first_terms = []
    for i, x in enumerate(points):
        terms = kernel.series_terms(data, x, cfg.order, params, samples=samples)
        first_terms.append(terms[0])
        for t in terms:
            rows.append({"point": i, "x1": x[0], "x2": x[1], "n": t["n"],
                         "u1": t["estimate"][0], "u2": t["estimate"][1],
                         "se1": t["standard_error"][0], "se2": t["standard_error"][1],
                         "magnitude": t["magnitude"], "bound": t["bound"], "rejected": t["rejected"]})
            run.check(f"term{t['n']}_within_bound_at_point{i}", t["within_bound"], t["magnitude"], t["bound"])
    frame = pd.DataFrame(rows)
    run.csv("kernel_terms.csv", frame)
    run.report["tail_bound"] = kernel.tail_bound(cfg.order, params, data.sup_norm)
    labels = [f"x{r.point}_n{r.n}" for r in frame.itertuples()]
    DataExporter.plot_estimates(labels, frame["magnitude"].tolist(),
                                np.hypot(frame["se1"], frame["se2"]).tolist(), run.path("kernel_terms.svg"),
                                title="Series term magnitudes against bounds", reference=frame["bound"].tolist())

    if data.radial_profile is not None:
        exact = kernel.radial_first_term(data, points, params)
        worst = 0.0
        for term, ref in zip(first_terms, exact):
            gap = float(np.hypot(*(np.asarray(term["estimate"]) - ref)))
            worst = max(worst, gap / max(term["magnitude_se"], 1e-300))
        run.check("first_term_vs_radial_formula", worst <= 3.0, worst, 3.0, detail="gap in standard errors")
        if data.name == "gaussian":
            closed = kernel.gaussian_first_term_closed_form(cfg.amplitude, cfg.width, points, params)
            rel = float(np.max(np.abs(closed - exact)) / max(float(np.max(np.abs(closed))), 1e-300))
            run.check_at_most("radial_quadrature_vs_closed_form", rel, 1e-8)
        lip = kernel.quasi_lipschitz_check(data, params, pairs=cfg.pairs, seed=cfg.seed)
        run.report["quasi_lipschitz"] = lip
        run.check("quasi_lipschitz", lip["passed"], lip["held_out_max_ratio"], lip["safety"] * lip["fitted_constant"],
                  detail=f"safety {lip['safety']:g}: {lip['safety_reason']}" if lip["safety_reason"] else None)
    else:
        run.log(f"{data.name} has no radial profile; radial checks skipped")

    far = kernel.osgood_partial_integral(log_delta=OSGOOD_LOG_DELTA)
    small = kernel.osgood_partial_integral(delta=1e-20)
    run.report["osgood"] = {"far": far, "delta_1e-20": small}
    run.check("osgood_divergence", far["integral"] > OSGOOD_FLOOR, far["integral"], OSGOOD_FLOOR,
              detail="integral from exp(-e^41) to 1")
    run.check_at_most("osgood_closed_form", abs(small["integral"] - small["closed_form"]), 1e-8)
    run.log(f"Osgood integral from 1e-20: {small['integral']:.10g}")

    r = np.linspace(0.0, 3.0, 301)
    lam = kernel.modulus(r)
    run.check("modulus_shape",
              bool(lam[0] == 0.0 and kernel.modulus(1.0) == 1.0 and np.all(np.diff(lam) > 0)
                   and np.all(lam[1:] >= r[1:])))


# ---------------------------------------------------------------------------
# particle
# ---------------------------------------------------------------------------

def particle(run: CommandRun):
    cfg = run.config
    params = run.params
    study = flow.transport_invariant_study(params, cfg.gamma, max_indices=(cfg.N, cfg.N + 2, cfg.N + 4),
                                           t=cfg.t_final, tol=max(cfg.tol, 1e-8), seed=cfg.seed,
                                           threads=run.threads)
    per_n = study["per_N"]
    first, last = per_n[cfg.N]["mean_error"], per_n[cfg.N + 4]["mean_error"]
    run.check("transport_invariant_improves", study["improved"], last, first,
              detail=", ".join(f"N={n}: {v['mean_error']:.3g}" for n, v in per_n.items()))
    run.csv("transport_invariant.csv", pd.DataFrame(study["rows"]))

    data = _vorticity(run)
    x0 = np.array([0.5, 0.5]) / math.sqrt(params.c)
    order = cfg.order
    M = max(cfg.M, 2)
    forward = kernel.particle_flow(data, x0, cfg.t_reverse, params, order, cfg.particle_tol, cfg.steps, M, cfg.seed)
    run.csv("particle_path.csv", pd.DataFrame({
        "time": forward.path.times, "x1": forward.path.points[:, 0], "x2": forward.path.points[:, 1],
    }))
    DataExporter.plot_series({"particle": (forward.path.points[:, 0], forward.path.points[:, 1])},
                             run.path("particle_path.svg"), title=f"Particle path in {data.name} vorticity",
                             xlabel="x1", ylabel="x2", equal_aspect=True)
    centers, _ = kernel.weak_test_grid(params.c)
    run.csv("weak_identity.csv", pd.DataFrame({
        "g1": centers[:, 0], "g2": centers[:, 1], "error": forward.weak_identity_errors,
    }))
    run.check_at_most("weak_transport_identity", forward.weak_identity_residual, cfg.particle_tol,
                      detail=f"relative, over {centers.shape[0]} bump test functions")

    back = kernel.reversibility(data, x0, cfg.t_reverse, params, order, cfg.particle_tol, cfg.steps, M, cfg.seed)
    run.check("particle_reversibility", back["passed"], back["error"], back["target"])

    still = kernel.particle_flow(kernel.zero_vorticity(), x0, cfg.t_reverse, params, order,
                                 cfg.particle_tol, cfg.steps, M, cfg.seed)
    run.check_at_most("zero_vorticity_at_rest", float(np.max(np.abs(still.path.points - x0))), 0.0)


HANDLERS = {
    Command.KERNEL_BOUNDS: kernel_bounds,
    Command.PARTICLE: particle,
}
