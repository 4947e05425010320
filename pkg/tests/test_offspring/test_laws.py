"""Tests for offspring laws: construction, sampling and generating functions."""

from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bprelab.errors import DomainError
from bprelab.offspring.laws import (
    FiniteTableRow,
    OffspringLaw,
    ZeroInflatedGeometricRow,
    geometric_law,
    gf_eval,
    gf_vector_eval,
    sample_offspring,
    table_law,
    truncated_geometric_pmf,
)


@pytest.fixture
def coin_law() -> OffspringLaw:
    """Type 0 has one type-0 child or none; type 1 has (1, 2) or none."""
    return table_law(
        [
            [((1, 0), 0.5), ((0, 0), 0.5)],
            [((1, 2), 0.25), ((0, 0), 0.75)],
        ]
    )


class TestFiniteTableRow:
    def test_probabilities_must_sum_to_one(self):
        with pytest.raises(DomainError, match="sum to"):
            FiniteTableRow(np.array([[1, 0], [0, 0]]), np.array([0.5, 0.4]))

    def test_rejects_negative_support(self):
        with pytest.raises(DomainError, match="non-negative"):
            FiniteTableRow(np.array([[-1, 0]]), np.array([1.0]))

    def test_one_probability_per_atom(self):
        with pytest.raises(DomainError, match="one probability per atom"):
            FiniteTableRow(np.array([[1, 0], [0, 0]]), np.array([1.0]))

    def test_moments(self):
        row = FiniteTableRow(np.array([[2, 0], [0, 2], [0, 0]]), np.array([0.25, 0.25, 0.5]))
        np.testing.assert_allclose(row.first_moments(), [0.5, 0.5])
        np.testing.assert_allclose(row.factorial_moments(), [[0.5, 0.0], [0.0, 0.5]])
        assert row.prob_zero() == 0.5
        np.testing.assert_allclose(row.prob_at_least_two(), [0.25, 0.25])
        assert row.max_coordinate() == 2


class TestGeometricRow:
    def test_truncated_pmf_sums_to_one(self):
        pmf = truncated_geometric_pmf(1.5, 10)
        assert pmf.sum() == pytest.approx(1.0)
        assert pmf.size == 11

    @settings(max_examples=40, deadline=None)
    @given(mean=st.floats(min_value=0.0, max_value=5.0), cap=st.integers(min_value=1, max_value=80))
    def test_pmf_is_a_distribution(self, mean, cap):
        pmf = truncated_geometric_pmf(mean, cap)
        assert np.all(pmf >= 0)
        assert pmf.sum() == pytest.approx(1.0)

    def test_large_cap_keeps_mean(self):
        row = ZeroInflatedGeometricRow(0.25, np.array([1.0, 0.5]), cap=200)
        np.testing.assert_allclose(row.first_moments(), [0.75, 0.375], rtol=1e-9)

    def test_rejects_bad_q0(self):
        with pytest.raises(DomainError, match="q0"):
            ZeroInflatedGeometricRow(1.5, np.array([1.0]))

    def test_scaled(self):
        row = ZeroInflatedGeometricRow(0.25, np.array([1.0, 0.5])).scaled(2.0)
        np.testing.assert_allclose(row.means, [2.0, 1.0])


class TestOffspringLaw:
    def test_rows_must_share_dimension(self):
        with pytest.raises(DomainError, match="dimension"):
            OffspringLaw((FiniteTableRow(np.array([[1, 0]]), np.array([1.0])),))

    def test_mean_matrix(self, coin_law):
        np.testing.assert_allclose(coin_law.mean_matrix(), [[0.5, 0.0], [0.25, 0.5]])

    def test_row_out_of_range(self, coin_law):
        with pytest.raises(DomainError, match="outside"):
            coin_law.row(2)

    def test_only_geometric_rows_scale(self, coin_law):
        assert not coin_law.tiltable
        with pytest.raises(DomainError, match="tilt knob"):
            coin_law.scaled(2.0)
        assert geometric_law([0.2, 0.2], np.ones((2, 2))).tiltable


class TestGeneratingFunctions:
    def test_exact_values(self, coin_law):
        assert gf_eval(coin_law, 0, [0.4, 0.9]) == pytest.approx(0.5 * 0.4 + 0.5)
        assert gf_eval(coin_law, 1, [0.4, 0.5]) == pytest.approx(0.25 * 0.4 * 0.25 + 0.75)

    def test_at_zero_is_prob_zero(self, coin_law):
        np.testing.assert_allclose(gf_vector_eval(coin_law, [0.0, 0.0]), [0.5, 0.75])

    def test_at_one_is_one(self):
        law = geometric_law([0.3, 0.1], np.array([[1.0, 2.0], [0.5, 0.5]]), cap=20)
        np.testing.assert_allclose(gf_vector_eval(law, np.ones(2)), [1.0, 1.0])

    def test_batch_axes(self, coin_law):
        s = np.array([[0.0, 0.0], [1.0, 1.0], [0.4, 0.9]])
        out = gf_vector_eval(coin_law, s)
        assert out.shape == (3, 2)
        np.testing.assert_allclose(out[1], [1.0, 1.0])

    def test_outside_unit_cube(self, coin_law):
        with pytest.raises(DomainError, match=r"\[0, 1\]\^p"):
            gf_eval(coin_law, 0, [1.2, 0.0])

    @settings(max_examples=40, deadline=None)
    @given(
        s=st.floats(min_value=0.0, max_value=1.0),
        t=st.floats(min_value=0.0, max_value=1.0),
    )
    def test_monotone(self, s, t):
        law = geometric_law([0.3, 0.1], np.array([[1.0, 2.0], [0.5, 0.5]]), cap=20)
        lo, hi = min(s, t), max(s, t)
        assert np.all(gf_vector_eval(law, [lo, lo]) <= gf_vector_eval(law, [hi, hi]) + 1e-12)


class TestSampling:
    def test_sample_offspring_from_support(self, coin_law, rng):
        for _ in range(20):
            child = sample_offspring(coin_law, 1, rng)
            assert tuple(child) in {(1, 2), (0, 0)}

    def test_sample_sum_mean(self, rng):
        row = FiniteTableRow(np.array([[2, 0], [0, 1], [0, 0]]), np.array([0.25, 0.25, 0.5]))
        totals = row.sample_sum(np.full(2000, 10), rng)
        # 20000 parents per column
        np.testing.assert_allclose(totals.mean(axis=0) / 10.0, row.first_moments(), atol=0.03)

    def test_geometric_sample_mean(self, rng):
        row = ZeroInflatedGeometricRow(0.25, np.array([1.0, 0.5]), cap=64)
        totals = row.sample_sum(np.full(2000, 10), rng)
        np.testing.assert_allclose(totals.mean(axis=0) / 10.0, row.first_moments(), atol=0.05)

    def test_zero_parents(self, rng):
        row = FiniteTableRow(np.array([[2, 0]]), np.array([1.0]))
        np.testing.assert_array_equal(row.sample_sum(np.array([0, 3]), rng), [[0, 0], [6, 0]])
