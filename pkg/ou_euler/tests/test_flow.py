import math

import numpy as np
import pytest
from scipy.integrate import trapezoid

from ..app.config import settings
from ..app.domain import GalerkinBasis, GaussianParams, MeasureParams, SpectralField
from ..app.services import coeffs, field, flow
from ..app.services.errors import InvalidArgumentError

PARAMS = GaussianParams(0.5)


@pytest.fixture(scope="module")
def ctx():
    basis = GalerkinBasis.box(3)
    return field.make_context(basis, coeffs.build_table(basis), PARAMS, 1.0)


def random_field(ctx, seed=0, scale=0.5):
    rng = np.random.default_rng(seed)
    d = ctx.basis.d
    return SpectralField(ctx.basis, scale * (rng.standard_normal(d) + 1j * rng.standard_normal(d)), ctx.c)


def test_zero_time_is_frozen(ctx):
    phi = random_field(ctx)
    traj = flow.integrate(ctx, phi, 0.0)
    assert np.array_equal(traj.final.coeffs, phi.coeffs)
    assert traj.div_integral[-1] == 0.0
    assert flow.density_kt(ctx, phi, 0.0) == 1.0


def test_single_mode_is_stationary(ctx):
    phi = SpectralField.from_modes(ctx.basis, ctx.c, {(2, 1): 1.0 + 1.0j})
    assert flow.stationarity_drift(ctx, phi, 1.0) <= 1e-12


def test_forward_backward_returns_to_start(ctx):
    phi = random_field(ctx, 1)
    assert flow.reversibility_error(ctx, phi, 0.3, tol=1e-10) < 1e-7


def test_ode_residual(ctx):
    traj = flow.integrate(ctx, random_field(ctx, 2), 0.2)
    assert flow.rhs_residual(ctx, traj, n_points=5) < 1e-6
    assert traj.integrator_stats["method"] == "RK45"
    assert traj.integrator_stats["accepted_steps"] >= 1


def test_divergence_integral_tracks_quadrature(ctx):
    phi = random_field(ctx, 3)
    times = np.linspace(0.0, 0.2, 201)
    traj = flow.integrate(ctx, phi, 0.2, tol=1e-10, t_eval=times)
    div = field.divergence_batch(ctx, traj.coeffs)
    assert traj.div_integral[-1] == pytest.approx(trapezoid(div, times), abs=1e-5)


def test_density_cocycle(ctx):
    res = flow.cocycle_check(ctx, random_field(ctx, 4), 0.1, 0.15, tol=1e-10)
    assert res["relative_error"] < 1e-5


def test_tolerance_range(ctx):
    with pytest.raises(InvalidArgumentError):
        flow.integrate(ctx, random_field(ctx), 0.1, tol=1e-2)


def test_batch_matches_single_and_ignores_threads(ctx, monkeypatch):
    monkeypatch.setattr(settings, "FLOW_BATCH", 4)
    rows = np.stack([random_field(ctx, s, scale=0.3).coeffs for s in range(10)])
    one = flow.integrate_batch(ctx, rows, 0.1, tol=1e-10, threads=1)
    many = flow.integrate_batch(ctx, rows, 0.1, tol=1e-10, threads=3)
    assert np.array_equal(one["final"], many["final"])
    assert not one["failed"].any()
    single = flow.integrate(ctx, SpectralField(ctx.basis, rows[6], ctx.c), 0.1, tol=1e-10)
    assert np.allclose(one["final"][6], single.final.coeffs, atol=1e-7)


def test_observables(ctx):
    rows = np.stack([random_field(ctx, s).coeffs for s in range(3)])
    assert np.array_equal(flow.observable_values("one", rows, ctx.basis, ctx.c), np.ones(3))
    assert np.all(flow.observable_values("clipped_mode", rows, ctx.basis, ctx.c, clip=0.1) <= 0.1)
    fourier = flow.observable_values("fourier", rows, ctx.basis, ctx.c)
    assert np.allclose(np.abs(fourier), 1.0)
    with pytest.raises(InvalidArgumentError):
        flow.observable_values("energy", rows, ctx.basis, ctx.c)


def test_push_at_time_zero_is_identity(ctx):
    mp = MeasureParams(gamma=1.0, params=PARAMS, basis=ctx.basis, seed=0)
    pushed = flow.push_batch(ctx, mp, 0.0, 20)
    assert np.array_equal(pushed.pushed, pushed.initial)
    assert np.all(pushed.density == 1.0)
    report = flow.observable_report(ctx, pushed, "inverse_energy")
    assert report["difference"] == 0.0


def test_quasi_invariance_of_constant(ctx):
    mp = MeasureParams(gamma=1.0, params=PARAMS, basis=ctx.basis, seed=1)
    report = flow.quasi_invariance_experiment(ctx, mp, "one", 0.05, 200, tol=1e-8)
    assert report["estimate_lhs"] == 1.0
    assert report["n_samples"] + report["n_failed"] == 200
    assert abs(report["mean_density"] - 1.0) <= 4 * report["se_density"]


def test_trajectory_frame(ctx):
    traj = flow.integrate(ctx, random_field(ctx), 0.1, t_eval=[0.0, 0.05, 0.1])
    frame = flow.trajectory_to_frame(traj)
    assert list(frame["time"]) == [0.0, 0.05, 0.1]
    assert "re_1_2" in frame.columns and "div_integral" in frame.columns


def test_radial_characteristic_stays_on_circle(ctx):
    phi = SpectralField.from_modes(ctx.basis, ctx.c, {(2, 0): 1.0, (0, 2): 1.0})
    traj = flow.integrate(ctx, phi, 0.5)
    x0 = np.array([1.0, 0.5]) / math.sqrt(ctx.c)
    path = flow.characteristics(traj, x0)
    radii = np.linalg.norm(path.points, axis=1)
    assert np.max(np.abs(radii - np.linalg.norm(x0))) < 1e-6
    assert flow.transport_error(traj, path) < 1e-6
    assert np.linalg.norm(path.points[-1] - x0) > 1e-3


def test_transport_study_shape():
    study = flow.transport_invariant_study(PARAMS, 1.0, max_indices=(2, 3), n_fields=2, n_points=2, t=0.05,
                                           tol=1e-8)
    assert set(study["per_N"]) == {2, 3}
    assert len(study["rows"]) == 2 * 2 * 2
    assert all(row["error"] >= 0 for row in study["rows"])


@pytest.fixture(scope="module")
def pushed_n4():
    basis = GalerkinBasis.box(4)
    ctx4 = field.make_context(basis, coeffs.build_table(basis), PARAMS, 4.0)
    mp = MeasureParams(gamma=4.0, params=PARAMS, basis=basis, seed=0)
    return ctx4, flow.push_batch(ctx4, mp, 0.1, 4000, tol=1e-8)


@pytest.mark.parametrize("observable", ["inverse_energy", "clipped_mode", "fourier"])
def test_quasi_invariance_of_bounded_observables(pushed_n4, observable):
    ctx4, pushed = pushed_n4
    report = flow.observable_report(ctx4, pushed, observable)
    assert report["n_failed"] == 0
    assert report["t"] == 0.1
    assert abs(report["difference"]) / report["combined_se"] < 3.0


def test_density_matches_change_of_variables(ctx):
    phi = random_field(ctx, seed=2)
    check = flow.liouville_check(ctx, phi, 0.2, tol=1e-11)
    assert check["log_kt"] == pytest.approx(math.log(flow.density_kt(ctx, phi, 0.2, tol=1e-11)), abs=1e-8)
    assert check["error"] < 1e-5
    # the reciprocal density, i.e. the opposite sign in the exponent, does not satisfy it
    assert check["flipped_error"] > 1e-3
    assert check["flipped_error"] > 100 * check["error"]


def test_change_of_variables_at_time_zero(ctx):
    check = flow.liouville_check(ctx, random_field(ctx, seed=3), 0.0, tol=1e-11)
    assert check["log_kt"] == 0.0
    assert check["log_jacobian"] == pytest.approx(0.0, abs=1e-9)
    assert check["error"] == pytest.approx(0.0, abs=1e-9)


def test_log_gibbs_weight(ctx):
    assert flow.log_gibbs_weight(ctx, np.zeros(ctx.basis.d))[0] == 0.0
    phi = SpectralField.from_modes(ctx.basis, ctx.c, {(1, 0): 1.0j})
    assert flow.log_gibbs_weight(ctx, phi.coeffs)[0] == pytest.approx(-0.5 * (1 + ctx.c) ** 2)
