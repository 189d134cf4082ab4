import numpy as np
import pytest

from ..app.domain import GalerkinBasis, GaussianParams, SpectralField
from ..app.services import coeffs, field
from ..app.services.errors import InvalidArgumentError

C = 0.5


def make_ctx(n=3, c=C, gamma=1.0):
    basis = GalerkinBasis.box(n)
    return field.make_context(basis, coeffs.build_table(basis), GaussianParams(c), gamma)


def random_field(ctx, seed=0, scale=0.5):
    rng = np.random.default_rng(seed)
    d = ctx.basis.d
    return SpectralField(ctx.basis, scale * (rng.standard_normal(d) + 1j * rng.standard_normal(d)), ctx.c)


@pytest.fixture(scope="module")
def ctx():
    return make_ctx()


def test_single_modes_are_stationary(ctx):
    for k in ctx.basis.indices:
        phi = SpectralField.from_modes(ctx.basis, ctx.c, {tuple(k): 1.0 - 0.5j})
        assert np.max(np.abs(field.vector_field(ctx, phi).coeffs)) == 0.0


def test_zero_mode_component_vanishes(ctx):
    b = field.vector_field(ctx, random_field(ctx))
    assert b.coefficient((0, 0)) == 0.0


def test_field_matches_quadrature_oracle(ctx):
    for seed in range(3):
        phi = random_field(ctx, seed)
        b = field.vector_field(ctx, phi).coeffs
        ref = field.oracle_vector_field(ctx, phi).coeffs
        assert np.max(np.abs(b - ref)) <= 1e-8 * max(1.0, np.max(np.abs(ref)))


def test_field_matches_oracle_for_other_scale():
    ctx = make_ctx(n=2, c=0.15)
    phi = random_field(ctx, 4)
    assert np.allclose(field.vector_field(ctx, phi).coeffs, field.oracle_vector_field(ctx, phi).coeffs, atol=1e-9)


def test_gradient_matches_finite_differences(ctx):
    phi = random_field(ctx, 1)
    g = field.gradient_matrix(ctx, phi)
    h = 1e-5
    for j in (1, 5, 9, 14):
        e = np.zeros(ctx.basis.d, dtype=complex)
        e[j] = 1.0
        fd = (field.vector_field_batch(ctx, phi.coeffs + h * e)[0]
              - field.vector_field_batch(ctx, phi.coeffs - h * e)[0]) / (2 * h)
        assert np.allclose(g[:, j], fd, atol=1e-8)


def test_gradient_entry_requires_positive_order(ctx):
    with pytest.raises(InvalidArgumentError):
        field.gradient_entry(ctx, (1, 0), (0, 0), random_field(ctx))


def test_second_gradient_is_symmetric_and_constant(ctx):
    basis = ctx.basis
    i, j, k = (2, 1), (1, 0), (1, 1)
    value = field.second_gradient_entry(ctx, i, j, k)
    assert value == pytest.approx(field.second_gradient_entry(ctx, j, i, k))
    h = 1e-5
    phi = random_field(ctx, 2)
    e = np.zeros(basis.d, dtype=complex)
    e[basis.position(i)] = 1.0
    plus = field.gradient_entry(ctx, j, k, phi.with_coeffs(phi.coeffs + h * e))
    minus = field.gradient_entry(ctx, j, k, phi.with_coeffs(phi.coeffs - h * e))
    assert (plus - minus) / (2 * h) == pytest.approx(value, abs=1e-7)


def test_divergence_matches_brute_force(ctx):
    for seed in range(2):
        phi = random_field(ctx, seed)
        exact = field.divergence(ctx, phi)
        assert field.bruteforce_divergence(ctx, phi) == pytest.approx(exact, abs=1e-6 * max(1.0, abs(exact)))


def test_divergence_of_single_mode_is_trace_only(ctx):
    phi = SpectralField.from_modes(ctx.basis, ctx.c, {(1, 0): 1.0})
    # B vanishes, so only the Lebesgue part remains
    assert field.gibbs_term(ctx, phi) == 0.0


def test_paper_form_reconciles(ctx):
    report = field.divergence_paper_form(ctx, random_field(ctx, 7))
    assert report["discrepancy"] < 1e-12 * max(1.0, abs(report["real_divergence"]))
    assert report["complex_total"] == report["linear"] + report["cubic"]


def test_divergence_batch_matches_single(ctx):
    rows = np.stack([random_field(ctx, s).coeffs for s in range(4)])
    batch = field.divergence_batch(ctx, rows)
    for m in range(4):
        assert batch[m] == pytest.approx(field.divergence(ctx, SpectralField(ctx.basis, rows[m], ctx.c)))


def test_mismatched_basis_rejected(ctx):
    other = SpectralField.zeros(GalerkinBasis.box(2), ctx.c)
    with pytest.raises(InvalidArgumentError):
        field.vector_field(ctx, other)


def test_norms(ctx):
    phi = SpectralField.from_modes(ctx.basis, ctx.c, {(1, 1): 2.0})
    assert field.enstrophy(phi) == pytest.approx((2 * ctx.c) ** 2 * 4.0)
    assert field.hs_norm(ctx, random_field(ctx)) > 0
    report = field.moment_regularity(ctx, np.stack([random_field(ctx, s).coeffs for s in range(5)]))
    assert report["n_samples"] == 5 and report["estimate"] > 0
