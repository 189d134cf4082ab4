import math

import numpy as np
import pytest

from ..app.domain import GalerkinBasis, GaussianParams
from ..app.services import coeffs
from ..app.services.errors import InvalidArgumentError, ResourceBudgetError

PARAMS = GaussianParams(0.5)


def test_theta_values():
    assert coeffs.theta(1, 1, 0) == pytest.approx(math.sqrt(2))
    assert coeffs.theta(1, 1, 1) == pytest.approx(1.0)
    assert coeffs.theta(3, 2, 3) == 0.0
    assert coeffs.theta(2, 5, 1) == coeffs.theta(5, 2, 1)


def test_simple_interaction_coefficient():
    # grad^perp H_(1,0) . grad H_(0,1) = c, whose projection on H_(0,0) is c
    assert coeffs.interaction((1, 0), (0, 1), (0, 0)) == pytest.approx(1.0)
    assert coeffs.interaction((0, 1), (1, 0), (0, 0)) == pytest.approx(-1.0)
    assert coeffs.oracle_interaction((1, 0), (0, 1), (0, 0), PARAMS) == pytest.approx(1.0, abs=1e-12)


def test_antisymmetry_is_exact():
    closed = coeffs.closed_form_tensor(GalerkinBasis.box(5))
    assert np.max(np.abs(closed + closed.transpose(1, 0, 2))) == 0.0


def test_closed_form_matches_quadrature():
    basis = GalerkinBasis.box(4)
    for c in (0.2, 0.7):
        oracle = coeffs.oracle_tensor(basis, GaussianParams(c))
        closed = coeffs.closed_form_tensor(basis)
        mask = coeffs.admissible_mask(basis)
        assert np.max(np.abs(closed - oracle)[mask] / np.maximum(np.abs(oracle[mask]), 1.0)) < 1e-8
        assert np.max(np.abs(oracle[~mask])) < 1e-9


def test_single_triple_oracle_agrees_with_tensor():
    basis = GalerkinBasis.box(3)
    tensor = coeffs.oracle_tensor(basis, PARAMS)
    for p, q, k in [((2, 1), (1, 2), (1, 2)), ((3, 0), (1, 1), (2, 0)), ((1, 3), (2, 2), (2, 2))]:
        expected = tensor[basis.position(p), basis.position(q), basis.position(k)]
        assert coeffs.oracle_interaction(p, q, k, PARAMS) == pytest.approx(expected, abs=1e-10)


def test_table_contents():
    basis = GalerkinBasis.box(4)
    table = coeffs.build_table(basis)
    orders = basis.orders
    assert np.all(orders[table.q_idx] < orders[table.p_idx])
    assert np.all(orders[table.k_idx] > 0)
    assert np.all(table.values != 0.0)
    for p, q, k, value in list(table.entries())[:50]:
        assert value == pytest.approx(coeffs.interaction(p, q, k))


def test_table_independent_of_threads():
    basis = GalerkinBasis.box(5)
    one = coeffs.build_table(basis, threads=1)
    many = coeffs.build_table(basis, threads=4)
    assert np.array_equal(one.p_idx, many.p_idx)
    assert np.array_equal(one.k_idx, many.k_idx)
    assert np.array_equal(one.values, many.values)


def test_table_lookup_is_antisymmetric():
    table = coeffs.build_table(GalerkinBasis.box(3))
    p, q, k, value = next(table.entries())
    assert table.get(p, q, k) == value
    assert table.get(q, p, k) == -value


def test_budget_is_enforced():
    with pytest.raises(ResourceBudgetError) as exc:
        coeffs.build_table(GalerkinBasis.box(6), budget_mb=1e-3)
    assert exc.value.max_index == 6


def test_cache_round_trip(tmp_path):
    basis = GalerkinBasis.box(3)
    table = coeffs.build_table(basis)
    path = coeffs.save_table(table, tmp_path / "t.oue")
    loaded = coeffs.load_table(path, basis)
    assert loaded is not None
    assert np.array_equal(loaded.values, table.values)
    assert np.array_equal(loaded.q_idx, table.q_idx)
    # built for another box
    assert coeffs.load_table(path, GalerkinBasis.box(4)) is None


def test_cache_rejects_truncated_file(tmp_path):
    path = tmp_path / "bad.oue"
    path.write_bytes(b"OU")
    assert coeffs.load_table(path, GalerkinBasis.box(2)) is None
    assert coeffs.load_table(tmp_path / "missing.oue", GalerkinBasis.box(2)) is None


def test_cached_table_writes_once(tmp_path):
    basis = GalerkinBasis.box(3)
    first = coeffs.cached_table(basis, tmp_path)
    assert (tmp_path / "table_N3.oue").exists()
    second = coeffs.cached_table(basis, tmp_path)
    assert np.array_equal(first.values, second.values)


def test_growth_ratios_finite():
    table = coeffs.build_table(GalerkinBasis.box(4))
    ratios = coeffs.growth_ratios(table)
    assert ratios.shape == (len(table),)
    assert np.all(np.isfinite(ratios)) and np.all(ratios > 0)
    assert coeffs.fit_growth_constant(table) == pytest.approx(ratios.max())
    stats = coeffs.table_stats(table)
    assert stats["entries"] == len(table)


def test_growth_constant_fitted_once_covers_smaller_boxes():
    constant = coeffs.fit_growth_constant(coeffs.build_table(GalerkinBasis.box(8)))
    assert math.isfinite(constant) and constant > 0
    for n in (2, 4, 6, 8):
        assert coeffs.growth_excess(coeffs.build_table(GalerkinBasis.box(n)), constant) <= 1.0 + 1e-12


def test_growth_excess_flags_a_constant_that_is_too_small():
    table = coeffs.build_table(GalerkinBasis.box(4))
    constant = coeffs.fit_growth_constant(table)
    assert coeffs.growth_excess(table, constant) == pytest.approx(1.0)
    assert coeffs.growth_excess(table, 0.5 * constant) == pytest.approx(2.0)
    with pytest.raises(InvalidArgumentError):
        coeffs.growth_excess(table, 0.0)
