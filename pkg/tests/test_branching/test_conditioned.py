"""Tests for joint replicas and survival-conditioned samples."""

from __future__ import annotations

import math

import numpy as np
import pytest

from bprelab.branching.conditioned import (
    branching_additivity,
    conditioned_log_population,
    conditioned_scaled_population,
    mass_near_zero,
    mean_population,
    reversed_product_check,
    scaled_rate,
    simulate_joint,
    survival_at_last_minimum,
)
from bprelab.branching.population import PopulationVector
from bprelab.environment.families import drift_ensemble
from bprelab.errors import DomainError, InsufficientAcceptance
from bprelab.estimates import Estimate

LN4 = math.log(4.0)


class TestSimulateJoint:
    def test_doubling_block(self, doubling, rng):
        jb = simulate_joint(doubling, PopulationVector((1, 0)), 4, 5, rng)
        assert jb.alive.all()
        np.testing.assert_array_equal(jb.total, 4.0**4)
        np.testing.assert_allclose(jb.walk, 4 * LN4)
        np.testing.assert_allclose(jb.log_columns, 4 * LN4)
        np.testing.assert_array_equal(jb.last_min_time, 1)

    def test_shared_atoms(self, lattice, rng):
        atoms = np.ones((3, 2), dtype=np.int64)
        jb = simulate_joint(lattice, PopulationVector((1, 1)), 2, 3, rng, atoms)
        np.testing.assert_allclose(jb.walk, -2.0 * math.log(2.0))
        np.testing.assert_array_equal(jb.last_min_time, 2)


class TestScaledPopulation:
    def test_doubling_ratio_is_one_half(self, doubling):
        sample = conditioned_scaled_population(doubling, (1, 0), 0, 6, 40, rng=3, min_accepted=10)
        assert sample.accepted == 40
        np.testing.assert_allclose(sample.values, 0.5)
        assert mass_near_zero(sample).value == 0.0

    def test_rejects_bad_type(self, doubling):
        with pytest.raises(DomainError, match="type 2"):
            conditioned_scaled_population(doubling, (1, 0), 2, 6, 10)

    def test_rejects_zero_population(self, doubling):
        with pytest.raises(DomainError, match="nonzero"):
            conditioned_scaled_population(doubling, (0, 0), 0, 6, 10)

    def test_dying_populations_raise(self):
        shrinking = drift_ensemble(r=0.5)
        with pytest.raises(InsufficientAcceptance):
            conditioned_scaled_population(shrinking, (1, 0), 0, 12, 50, rng=3)


class TestLogPopulation:
    def test_doubling_tracks_the_walk(self, doubling):
        sample = conditioned_log_population(doubling, (1, 0), 8, 30, rng=5, min_accepted=10)
        np.testing.assert_allclose(sample.log_population, sample.walk)
        np.testing.assert_allclose(sample.walk, 8 * LN4 / math.sqrt(8))
        assert sample.coupling_exceedance().value == 0.0
        assert sample.switched == 0

    def test_counts_log_switches(self, doubling):
        sample = conditioned_log_population(doubling, (1, 0), 30, 20, rng=5, min_accepted=10)
        assert sample.switched == 20
        np.testing.assert_allclose(sample.log_population, sample.walk)
        assert sample.to_dict()["switched_to_log"] == 20

    def test_lattice_acceptance(self, lattice):
        sample = conditioned_log_population(lattice, (1, 0), 8, 2000, rng=5, min_accepted=10)
        assert 0 < sample.acceptance.value < 1
        assert sample.accepted == round(sample.acceptance.value * 2000)


class TestStructuralChecks:
    def test_reversed_products_agree(self, lattice):
        check = reversed_product_check(lattice, 8, 2000, rng=7)
        assert check.statistic < 0.1
        assert check.to_dict()["N"] == 2000

    def test_doubling_additivity_is_exact(self, doubling):
        assert branching_additivity(doubling, (1, 0), 5, 50, rng=9) == 0.0

    def test_lattice_additivity(self, lattice):
        assert branching_additivity(lattice, (1, 0), 4, 2000, rng=9) < 0.1

    def test_growing_walk_never_ends_at_its_minimum(self, doubling):
        est = survival_at_last_minimum(doubling, (1, 0), 6, 50, rng=11)
        assert est.value == 0.0

    def test_scaled_rate(self):
        out = scaled_rate(Estimate(0.1, 0.01, 10), 4)
        assert out.value == pytest.approx(0.8)
        assert out.stderr == pytest.approx(0.08)


class TestMeanPopulation:
    def test_matches_mean_matrix_product(self, lattice):
        atoms = [0, 1, 0]
        expected = np.array([1.0, 0.0]) @ lattice.mean_matrices[0] @ lattice.mean_matrices[1] @ lattice.mean_matrices[0]
        np.testing.assert_allclose(expected, [0.6875, 1.3125])
        means = mean_population(lattice, atoms, (1, 0), 20_000, rng=13)
        for est, target in zip(means, expected):
            assert est.within(target, k=4.0)
