import math

import numpy as np
import pytest

from ..app.config import settings
from ..app.domain import GalerkinBasis, GaussianParams, MeasureParams, SpectralField
from ..app.services import coeffs, field, measure
from ..app.services.errors import InvalidArgumentError

PARAMS = GaussianParams(0.5)


def mp_for(n=2, gamma=1.0, seed=0, real_mode=False):
    return MeasureParams(gamma=gamma, params=PARAMS, basis=GalerkinBasis.box(n), seed=seed, real_mode=real_mode)


def test_sampling_is_deterministic_and_prefix_stable():
    mp = mp_for(seed=11)
    a = measure.sample(mp, 100).coeffs
    b = measure.sample(mp, 100).coeffs
    assert np.array_equal(a, b)
    assert np.array_equal(measure.sample(mp, 10).coeffs, a[:10])
    assert not np.array_equal(measure.sample(mp_for(seed=12), 10).coeffs, a[:10])


def test_sampling_independent_of_threads():
    mp = mp_for(n=1, seed=3)
    count = settings.SAMPLE_BLOCK + 17
    one = measure.sample(mp, count, threads=1).coeffs
    many = measure.sample(mp, count, threads=3).coeffs
    assert np.array_equal(one, many)


def test_sample_streams_do_not_depend_on_basis_size():
    small = measure.sample(mp_for(n=1, seed=5), 50)
    large = measure.sample(mp_for(n=3, seed=5), 50)
    k = (1, 1)
    assert np.array_equal(small.coeffs[:, small.basis.position(k)], large.coeffs[:, large.basis.position(k)])


def test_real_mode_has_no_imaginary_part():
    batch = measure.sample(mp_for(real_mode=True), 20)
    assert np.all(batch.coeffs.imag == 0.0)
    assert batch.seed_path["real_mode"] is True


def test_second_moment_matches_law():
    mp = mp_for(gamma=2.0, seed=1)
    batch = measure.sample(mp, 20000)
    values = np.abs(batch.coeffs[:, mp.basis.position((1, 0))]) ** 2
    exact = 2.0 / (2.0 * (1 + PARAMS.c) ** 2)
    se = values.std(ddof=1) / math.sqrt(values.size)
    assert abs(values.mean() - exact) < 5 * se
    assert measure.exact_moment((1, 0), 1, 2.0, PARAMS.c) == pytest.approx(exact)


def test_moment_check_report():
    res = measure.moment_check(mp_for(seed=2), (1, 1), 2, 4000)
    assert res["exact"] == pytest.approx(measure.exact_moment((1, 1), 2, 1.0, PARAMS.c))
    assert res["z_score"] < 5
    with pytest.raises(InvalidArgumentError):
        measure.moment_check(mp_for(), (1, 1), 1, 50)
    with pytest.raises(InvalidArgumentError):
        measure.moment_check(mp_for(), (1, 1), 0, 200)


def test_sobolev_moment():
    res = measure.sobolev_moment_check(mp_for(n=3, seed=4), 0.5, 4000)
    assert res["z_score"] < 5
    with pytest.raises(InvalidArgumentError):
        measure.sobolev_moment_check(mp_for(), 0.0, 100)


def test_samples_to_frame_columns():
    batch = measure.sample(mp_for(n=1), 3)
    frame = measure.samples_to_frame(batch)
    assert list(frame.columns) == ["re_0_0", "im_0_0", "re_0_1", "im_0_1", "re_1_0", "im_1_0", "re_1_1", "im_1_1"]
    assert len(frame) == 3


def test_lp_loc_norm_of_constant():
    phi = SpectralField.from_modes(GalerkinBasis.box(1), PARAMS.c, {(0, 0): 1.0})
    R = 1.5
    for p in (2.5, 3.0):
        assert measure.lp_loc_norm(phi, p, R) == pytest.approx((math.pi * R ** 2) ** (1 / p), rel=1e-10)
    with pytest.raises(InvalidArgumentError):
        measure.lp_loc_norm(phi, 3.0, 0.0)


def test_support_diagnostic_rows():
    rows = measure.support_diagnostic(1.0, PARAMS.c, [1, 2], 3.0, 1.0, M=4)
    assert [r["N"] for r in rows] == [1, 2]
    assert all(r["mean"] > 0 for r in rows)


def test_theoretical_slopes():
    assert measure.theoretical_slope(10 / 3) == pytest.approx(-1 / 6)
    assert measure.theoretical_slope(10 / 3, product=True) == pytest.approx(-1 / 3)
    assert measure.theoretical_slope(2.0) == pytest.approx(0.0)


def test_l2_norm_of_diagonal_hermite_function():
    for n in (1, 4, 9):
        assert measure.diagonal_lp_norm(n, 2.0) == pytest.approx(1.0, abs=1e-6)


def test_dispersive_slopes():
    single = measure.dispersive_exponent(10 / 3, 20)
    assert single["slope"] <= -1 / 6 + 0.05
    assert single["ci_low"] <= single["slope"] <= single["ci_high"]
    assert len(single["norms"]) == 10
    product = measure.dispersive_product_exponent(20)
    assert product["slope"] <= -1 / 3 + 0.05
    assert abs(measure.dispersive_exponent(2.0, 12)["slope"]) < 1e-4


def test_dispersive_arguments():
    with pytest.raises(InvalidArgumentError):
        measure.dispersive_exponent(4.0, 20)
    with pytest.raises(InvalidArgumentError):
        measure.dispersive_exponent(3.0, 8)


def test_exponential_moment_ladder():
    basis = GalerkinBasis.box(2)
    ctx = field.make_context(basis, coeffs.build_table(basis), PARAMS, 1.0)
    mp = MeasureParams(gamma=1.0, params=PARAMS, basis=basis, seed=0)
    low = measure.exponential_moment_check(ctx, mp, 0.05, 400)
    high = measure.exponential_moment_check(ctx, mp, 0.1, 400)
    assert low["status"] == "finite"
    assert [row["n_samples"] for row in low["ladder"]] == [100, 200, 400]
    assert high["divergence"]["estimate"] >= low["divergence"]["estimate"] >= 1.0
    with pytest.raises(InvalidArgumentError):
        measure.exponential_moment_check(ctx, mp, -1.0, 10)


def test_exponential_moment_overflow_is_reported():
    report = measure._exp_estimate(np.array([1.0, 1e5]), 1.0)
    assert report["estimate"] is None
    assert "diverged" in report["status"]


def test_regularity_ladder_is_finite_and_stable():
    contexts = []
    for n in (4, 6, 8):
        basis = GalerkinBasis.box(n)
        contexts.append(field.make_context(basis, coeffs.build_table(basis), PARAMS, 1.0))
    ladder = measure.regularity_ladder(contexts, 300, seed=0)
    assert list(ladder["per_N"]) == [4, 6, 8]
    assert ladder["finite"]
    for report in ladder["per_N"].values():
        assert report["n_samples"] == 300
        assert report["estimate"] > 0 and report["standard_error"] > 0
    assert ladder["spread"] >= 1.0 and math.isfinite(ladder["spread"])
    with pytest.raises(InvalidArgumentError):
        measure.regularity_ladder([], 300)
