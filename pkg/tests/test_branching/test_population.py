"""Tests for population vectors, steps and batches."""

from __future__ import annotations

import math

import numpy as np
import pytest

from bprelab.branching.population import (
    EXACT_LIMIT,
    NEVER,
    PopulationBatch,
    PopulationVector,
    simulate_trajectory,
    step_population,
)
from bprelab.errors import DomainError, OverflowGuard

LN4 = math.log(4.0)


class TestPopulationVector:
    def test_rejects_negative_counts(self):
        with pytest.raises(DomainError, match="non-negative"):
            PopulationVector((1, -1))

    def test_rejects_empty(self):
        with pytest.raises(DomainError):
            PopulationVector(())

    def test_direction(self):
        np.testing.assert_allclose(PopulationVector((1, 3)).direction().coords, [0.25, 0.75])
        with pytest.raises(DomainError, match="no direction"):
            PopulationVector((0, 0)).direction()

    def test_total_and_zero(self):
        z = PopulationVector.of(np.array([2, 5]))
        assert z.total == 7
        assert not z.is_zero
        assert PopulationVector((0, 0)).is_zero


class TestStepPopulation:
    def test_doubling_step(self, doubling_law, rng):
        z = step_population(PopulationVector((1, 0)), doubling_law, rng)
        assert z.counts == (2, 2)
        assert step_population(z, doubling_law, rng).counts == (8, 8)

    def test_zero_stays_zero(self, lattice, rng):
        zero = PopulationVector((0, 0))
        assert step_population(zero, lattice.laws[0], rng) is zero

    def test_type_mismatch(self, doubling_law, rng):
        with pytest.raises(DomainError, match="types"):
            step_population(PopulationVector((1,)), doubling_law, rng)

    def test_overflow_guard(self, doubling_law, rng):
        with pytest.raises(OverflowGuard):
            step_population(PopulationVector((2**62, 0)), doubling_law, rng)

    def test_lattice_offspring_are_even(self, lattice, rng):
        # every table atom places 0 or 2 children of each type
        z = PopulationVector((3, 2))
        for _ in range(20):
            z = step_population(z, lattice.laws[0], rng)
            if z.is_zero:
                break
            assert all(c % 2 == 0 for c in z.counts)


class TestTrajectory:
    def test_doubling_trajectory(self, doubling, rng):
        traj = simulate_trajectory(doubling, PopulationVector((1, 0)), 3, rng)
        assert [z.counts for z in traj.populations] == [(1, 0), (2, 2), (8, 8), (32, 32)]
        np.testing.assert_allclose(traj.walk.S, LN4 * np.arange(4))
        assert traj.survived
        assert traj.to_dict()["env_indices"] == [0, 0, 0]

    def test_zero_population_uses_barycenter(self, lattice, rng):
        traj = simulate_trajectory(lattice, PopulationVector((0, 0)), 2, rng)
        assert not traj.survived
        np.testing.assert_allclose(traj.walk.x0.coords, [0.5, 0.5])


class TestPopulationBatch:
    def test_start(self):
        batch = PopulationBatch.start(PopulationVector((1, 2)), 3)
        assert batch.size == 3
        np.testing.assert_array_equal(batch.counts, [[1, 2]] * 3)
        assert np.all(batch.switched_at == NEVER)
        np.testing.assert_allclose(batch.log_total(), math.log(3.0))
        np.testing.assert_array_equal(batch.total(), [3.0, 3.0, 3.0])

    def test_switches_to_log_tracking(self, doubling, rng):
        batch = PopulationBatch.start(PopulationVector((1, 0)), 2)
        atoms = np.zeros(2, dtype=np.int64)
        for _ in range(26):
            batch.advance(doubling, atoms, rng)
        assert np.all(batch.exact)
        assert batch.counts.sum(axis=1)[0] == 4**26
        batch.advance(doubling, atoms, rng)
        assert 4**27 > EXACT_LIMIT
        assert not batch.exact.any()
        np.testing.assert_array_equal(batch.switched_at, [27, 27])
        for _ in range(3):
            batch.advance(doubling, atoms, rng)
        np.testing.assert_allclose(batch.log_total(), 30 * LN4)
        np.testing.assert_allclose(batch.log_counts(), 30 * LN4 - math.log(2.0))
        assert batch.alive().all()

    def test_extinct_replicas(self, lattice, rng):
        batch = PopulationBatch.start(PopulationVector((1, 0)), 500)
        for _ in range(10):
            batch.advance(lattice, np.ones(500, dtype=np.int64), rng)
        dead = ~batch.alive()
        assert dead.any()
        assert np.all(np.isneginf(batch.log_total()[dead]))
        assert np.all(batch.total()[dead] == 0.0)
