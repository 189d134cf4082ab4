"""
evolve and quasi-invariance: single trajectories of the Galerkin ODE and the
density of the pushed-forward measure.
"""

import math

import numpy as np
import pandas as pd

from ..domain import MeasureParams, SpectralField
from ..exporter import DataExporter
from ..schemas import Command
from ..services import field, flow, measure
from .base import CommandRun

STATIONARITY_HORIZON = 1.0
LIOUVILLE_TOL = 1e-11
LIOUVILLE_GAP = 1e-5


def register(subparsers, parents):
    p = subparsers.add_parser(Command.EVOLVE.value, parents=parents,
                              help="Integrate the Galerkin ODE and check its invariants")
    p.add_argument("--initial-mode", dest="initial_mode", type=int, nargs=2, default=None, metavar=("K1", "K2"),
                   help="Mode of the single-mode stationarity check")
    p.add_argument("--t-reverse", dest="t_reverse", type=float, default=None,
                   help="Horizon of the forward-backward reversibility check")

    p = subparsers.add_parser(Command.QUASI_INVARIANCE.value, parents=parents,
                              help="Compare E[F(U_t phi)] with E[F(phi) k_t(phi)]")
    p.add_argument("--observable", choices=flow.OBSERVABLES, default=None,
                   help="Single observable (default: all)")
    p.add_argument("--initial-mode", dest="initial_mode", type=int, nargs=2, default=None, metavar=("K1", "K2"),
                   help="Mode read by the clipped_mode observable")


# ---------------------------------------------------------------------------
# evolve
# ---------------------------------------------------------------------------

def evolve(run: CommandRun):
    cfg = run.config
    ctx = run.context(cfg.N)
    basis = ctx.basis
    tol = cfg.tol

    single = SpectralField.from_modes(basis, ctx.c, {tuple(cfg.initial_mode): 1.0})
    run.check_at_most(f"single_mode_stationary_{cfg.initial_mode[0]}_{cfg.initial_mode[1]}",
                      flow.stationarity_drift(ctx, single, STATIONARITY_HORIZON, tol), 1e-10,
                      detail=f"t in [0, {STATIONARITY_HORIZON:g}]")

    mp = MeasureParams(gamma=cfg.gamma, params=run.params, basis=basis, seed=cfg.seed)
    phi0 = measure.sample(mp, 1).fields[0]
    run.log(f"Initial enstrophy {field.enstrophy(phi0):.6g}, divergence {field.divergence(ctx, phi0):.6g}")

    run.check_at_most("reversibility", flow.reversibility_error(ctx, phi0, cfg.t_reverse, tol), 1e-6,
                      detail=f"t={cfg.t_reverse:g}, tol={tol:g}")

    if cfg.t_final > 0:
        traj = flow.integrate(ctx, phi0, cfg.t_final, tol)
        run.check_at_most("ode_residual", flow.rhs_residual(ctx, traj, n_points=10, seed=cfg.seed), 1e-6)
        sampled = flow.integrate(ctx, phi0, cfg.t_final, tol, t_eval=np.linspace(0.0, cfg.t_final, 21))
        run.csv("trajectory.csv", flow.trajectory_to_frame(sampled))
        run.report["integrator"] = traj.integrator_stats
        run.log(f"Final enstrophy {field.enstrophy(traj.final):.6g}, "
                f"divergence integral {traj.div_integral[-1]:.6g}, {traj.integrator_stats['accepted_steps']} steps")
        strongest = np.argsort(-np.abs(phi0.coeffs))[:4]
        series = {f"Re phi_{basis.indices[i].label()}": (sampled.times, sampled.coeffs[:, i].real)
                  for i in strongest}
        DataExporter.plot_series(series, run.path("trajectory.svg"), title="Galerkin trajectory",
                                 xlabel="t", ylabel="coefficient")
    else:
        run.log("t_final is 0; the trajectory is the initial state")

    if cfg.N >= 2:
        radial = SpectralField.from_modes(basis, ctx.c, {(2, 0): 1.0, (0, 2): 1.0})
        horizon = cfg.t_final if cfg.t_final > 0 else cfg.t_reverse
        traj = flow.integrate(ctx, radial, horizon, tol)
        x0 = np.array([1.0, 0.5]) / math.sqrt(ctx.c)
        path = flow.characteristics(traj, x0, tol)
        drift = float(np.max(np.abs(np.linalg.norm(path.points, axis=1) - np.linalg.norm(x0))))
        run.check_at_most("radial_characteristic_radius", drift, 1e-6)
        run.check_at_most("radial_transport_invariant", flow.transport_error(traj, path), 1e-6)
        run.csv("radial_characteristic.csv",
                pd.DataFrame({"time": path.times, "x1": path.points[:, 0], "x2": path.points[:, 1]}))
    else:
        run.log("N < 2: radial stream function check skipped")


# ---------------------------------------------------------------------------
# quasi-invariance
# ---------------------------------------------------------------------------

def quasi_invariance(run: CommandRun):
    cfg = run.config
    ctx = run.context(cfg.N)
    mp = MeasureParams(gamma=cfg.gamma, params=run.params, basis=ctx.basis, seed=cfg.seed)
    run.log(f"Pushing {cfg.M} samples to t=+-{cfg.t_final:g} on N={cfg.N}")
    pushed = flow.push_batch(ctx, mp, cfg.t_final, cfg.M, cfg.tol, threads=run.threads)
    if pushed.failed.any():
        run.log(f"{int(pushed.failed.sum())} samples flagged and excluded")

    ok = ~pushed.failed
    density = pushed.density[ok]
    mean_k = float(np.mean(density))
    se_k = float(np.std(density, ddof=1) / math.sqrt(density.size)) if density.size > 1 else float("nan")
    z = abs(mean_k - 1.0) / se_k if se_k > 0 else (0.0 if mean_k == 1.0 else float("inf"))
    run.check("density_mean_one", z <= 3.0, z, 3.0, detail=f"E[k_t]={mean_k:.6g}, SE {se_k:.3g}")

    observables = [cfg.observable] if cfg.observable else list(flow.OBSERVABLES)
    reports = []
    for name in observables:
        options = {"mode": tuple(cfg.initial_mode)} if name == "clipped_mode" else {}
        report = flow.observable_report(ctx, pushed, name, **options)
        reports.append(report)
        combined = report["combined_se"]
        ratio = abs(report["difference"]) / combined if combined > 0 else (
            0.0 if report["difference"] == 0 else float("inf"))
        run.check(f"quasi_invariance_{name}", ratio <= 3.0, ratio, 3.0,
                  detail=f"lhs {report['estimate_lhs']:.6g}, rhs {report['estimate_rhs']:.6g}")
    run.json("quasi_invariance.json", reports)
    run.report["observables"] = reports

    phi = SpectralField(ctx.basis, pushed.initial[0], ctx.c)
    half = cfg.t_final / 2.0
    cocycle = flow.cocycle_check(ctx, phi, half, half, cfg.tol)
    run.check_at_most("density_cocycle", cocycle["relative_error"], 1e-5, detail=f"t=s={half:g}")

    liouville = flow.liouville_check(ctx, phi, cfg.t_final, min(cfg.tol, LIOUVILLE_TOL))
    run.report["liouville"] = liouville
    run.check_at_most("density_liouville", liouville["error"], LIOUVILLE_GAP,
                      detail=f"log k_t {liouville['log_kt']:.6g}, reciprocal off by {liouville['flipped_error']:.3g}")

    run.csv("densities.csv", pd.DataFrame({
        "sample": np.arange(pushed.density.size),
        "density": pushed.density,
        "failed": pushed.failed,
    }))
    if density.size:
        DataExporter.plot_histogram(np.log(density), run.path("log_density.svg"),
                                    title=f"log k_t at t={cfg.t_final:g}", xlabel="log k_t")


HANDLERS = {
    Command.EVOLVE: evolve,
    Command.QUASI_INVARIANCE: quasi_invariance,
}
