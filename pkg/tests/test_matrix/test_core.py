"""Tests for positive matrices, the simplex and normalized products."""

from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bprelab.errors import DegenerateMatrix, DomainError
from bprelab.matrix.batch import act_right_batch, product_log_norms_batch
from bprelab.matrix.core import (
    PosMatrix,
    SimplexPoint,
    act_left,
    act_right,
    column_spread,
    cond_bound,
    contraction_coeff,
    extend_product,
    hennion_distance,
    in_class_B,
    l1_norm,
    min_col_sum,
    product_chain,
    rank_one_direction,
    rho,
)

positive_entries = st.floats(min_value=0.1, max_value=10.0, allow_nan=False)
matrices = st.lists(positive_entries, min_size=4, max_size=4).map(lambda v: np.array(v).reshape(2, 2))
points = st.lists(st.floats(min_value=0.0, max_value=1.0), min_size=2, max_size=2).filter(
    lambda v: sum(v) > 1e-3
)


class TestPosMatrix:
    def test_rejects_negative_entries(self):
        with pytest.raises(DomainError, match="non-negative"):
            PosMatrix([[1.0, -1.0], [0.0, 1.0]])

    def test_rejects_non_square(self):
        with pytest.raises(DomainError, match="square"):
            PosMatrix(np.ones((2, 3)))

    def test_rejects_non_finite(self):
        with pytest.raises(DomainError, match="finite"):
            PosMatrix([[1.0, np.inf], [0.0, 1.0]])

    def test_entries_are_read_only(self):
        m = PosMatrix([[1.0, 2.0], [3.0, 4.0]])
        with pytest.raises(ValueError):
            m.entries[0, 0] = 5.0

    def test_matmul(self):
        m = PosMatrix([[1.0, 2.0], [3.0, 4.0]]) @ PosMatrix.identity(2)
        np.testing.assert_array_equal(m.entries, [[1.0, 2.0], [3.0, 4.0]])


class TestSimplexPoint:
    def test_renormalizes(self):
        x = SimplexPoint([1.0, 3.0])
        np.testing.assert_allclose(x.coords, [0.25, 0.75])

    def test_rejects_zero_vector(self):
        with pytest.raises(DomainError, match="positive coordinate sum"):
            SimplexPoint([0.0, 0.0])

    def test_rejects_negative(self):
        with pytest.raises(DomainError):
            SimplexPoint([1.0, -0.5])

    def test_basis_and_barycenter(self):
        np.testing.assert_array_equal(SimplexPoint.basis(3, 1).coords, [0.0, 1.0, 0.0])
        np.testing.assert_allclose(SimplexPoint.barycenter(4).coords, [0.25] * 4)


class TestNorms:
    def test_l1_and_min_col_sum(self):
        m = [[1.0, 2.0], [3.0, 4.0]]
        assert l1_norm(m) == 10.0
        assert min_col_sum(m) == 4.0

    def test_cond_bound(self):
        assert cond_bound([[1.0, 0.0], [0.0, 1.0]]) == 2.0
        assert cond_bound([[0.1, 0.0], [0.0, 0.1]]) == pytest.approx(10.0)

    def test_cond_bound_vanishing_column(self):
        with pytest.raises(DegenerateMatrix):
            cond_bound([[1.0, 0.0], [1.0, 0.0]])

    def test_in_class_B(self):
        m = [[1.0, 2.0], [3.0, 4.0]]
        assert in_class_B(m, 4.0)
        assert not in_class_B(m, 3.0)
        assert not in_class_B([[0.0, 1.0], [1.0, 1.0]], 100.0)

    def test_in_class_B_rejects_small_B(self):
        with pytest.raises(DomainError, match="B must be >= 1"):
            in_class_B([[1.0]], 0.5)


class TestActions:
    def test_right_action_and_cocycle_value(self):
        x = SimplexPoint([0.5, 0.5])
        m = [[1.0, 1.0], [0.5, 1.5]]
        np.testing.assert_allclose(act_right(x, m).coords, [0.375, 0.625])
        assert rho(x, m) == pytest.approx(math.log(2.0))

    def test_left_action(self):
        y = act_left([[1.0, 0.0], [1.0, 1.0]], SimplexPoint([0.5, 0.5]))
        np.testing.assert_allclose(y.coords, [1.0 / 3.0, 2.0 / 3.0])

    def test_vanishing_image(self):
        with pytest.raises(DegenerateMatrix):
            act_right(SimplexPoint.basis(2, 0), [[0.0, 0.0], [1.0, 1.0]])

    @settings(max_examples=50, deadline=None)
    @given(x=points, m=matrices, n=matrices)
    def test_cocycle_identity(self, x, m, n):
        x = SimplexPoint(x)
        assert rho(x, m @ n) == pytest.approx(rho(act_right(x, m), n) + rho(x, m), abs=1e-10)


class TestDistance:
    def test_distance_to_self_is_zero(self):
        x = SimplexPoint([0.2, 0.8])
        assert hennion_distance(x, x) == pytest.approx(0.0, abs=1e-15)

    def test_basis_vectors_are_at_distance_one(self):
        assert hennion_distance(SimplexPoint.basis(2, 0), SimplexPoint.basis(2, 1)) == 1.0

    @settings(max_examples=50, deadline=None)
    @given(x=points, y=points)
    def test_bounds_and_l1_domination(self, x, y):
        x, y = SimplexPoint(x), SimplexPoint(y)
        d = hennion_distance(x, y)
        assert 0.0 <= d <= 1.0
        assert np.abs(x.coords - y.coords).sum() <= 2.0 * d + 1e-12

    def test_contraction_of_rank_one_matrix(self):
        assert contraction_coeff(np.ones((3, 3))) == pytest.approx(0.0, abs=1e-15)

    def test_contraction_of_identity(self):
        assert contraction_coeff(np.eye(2)) == 1.0

    @settings(max_examples=50, deadline=None)
    @given(m=matrices, x=points, y=points)
    def test_left_action_contracts(self, m, x, y):
        x, y = SimplexPoint(x), SimplexPoint(y)
        lhs = hennion_distance(act_left(m, x), act_left(m, y))
        assert lhs <= contraction_coeff(m) * hennion_distance(x, y) + 1e-12


class TestProducts:
    def test_long_chain_does_not_overflow(self):
        prod = product_chain([2.0 * np.eye(2)] * 2000)
        assert prod.length == 2000
        assert prod.log_norm == pytest.approx(2001 * math.log(2.0))
        np.testing.assert_allclose(prod.column_log_norms(), [2000 * math.log(2.0)] * 2)

    def test_short_chain_reconstructs(self):
        a = np.array([[1.0, 2.0], [3.0, 1.0]])
        b = np.array([[0.5, 0.5], [1.0, 2.0]])
        np.testing.assert_allclose(product_chain([a, b]).matrix(), a @ b)

    def test_empty_chain_needs_p(self):
        with pytest.raises(DomainError, match="needs p"):
            product_chain([])
        prod = product_chain([], p=2)
        assert prod.length == 0
        np.testing.assert_array_equal(prod.unit, np.eye(2))

    def test_extend_matches_full_chain(self):
        a = np.array([[1.0, 2.0], [3.0, 1.0]])
        b = np.array([[0.5, 0.5], [1.0, 2.0]])
        extended = extend_product(product_chain([a]), b)
        full = product_chain([a, b])
        assert extended.log_norm == pytest.approx(full.log_norm)
        np.testing.assert_allclose(extended.bar_matrix.entries, full.bar_matrix.entries)

    def test_vanishing_column(self):
        with pytest.raises(DegenerateMatrix):
            product_chain([[[1.0, 0.0], [1.0, 0.0]]])

    def test_bar_matrix_columns_sum_to_one(self):
        prod = product_chain([[[1.0, 2.0], [3.0, 1.0]], [[0.5, 0.5], [1.0, 2.0]]])
        np.testing.assert_allclose(prod.bar_matrix.entries.sum(axis=0), [1.0, 1.0])

    def test_rank_one_direction_and_spread(self):
        prod = product_chain([np.ones((2, 2))] * 3)
        np.testing.assert_allclose(rank_one_direction(prod).coords, [0.5, 0.5])
        assert column_spread(prod) == pytest.approx(0.0, abs=1e-15)

    def test_rank_one_direction_needs_a_step(self):
        with pytest.raises(DomainError):
            rank_one_direction(product_chain([], p=2))


class TestBatch:
    def test_act_right_batch_matches_scalar(self):
        x = np.array([[0.5, 0.5], [1.0, 0.0]])
        mats = np.array([[[1.0, 1.0], [0.5, 1.5]], [[2.0, 0.0], [0.0, 1.0]]])
        y, inc = act_right_batch(x, mats)
        for r in range(2):
            np.testing.assert_allclose(y[r], act_right(SimplexPoint(x[r]), mats[r]).coords)
            assert inc[r] == pytest.approx(rho(SimplexPoint(x[r]), mats[r]))

    def test_product_log_norms_batch(self):
        mats = np.array([2.0 * np.eye(2), 0.5 * np.eye(2)])
        atoms = np.array([[0, 0, 1], [1, 1, 1]])
        logs = product_log_norms_batch(mats, atoms)
        np.testing.assert_allclose(logs, [math.log(4.0), math.log(0.25)])

    def test_empty_product_is_identity(self):
        logs = product_log_norms_batch(np.array([np.eye(3)]), np.zeros((2, 0), dtype=np.int64))
        np.testing.assert_allclose(logs, [math.log(3.0)] * 2)
