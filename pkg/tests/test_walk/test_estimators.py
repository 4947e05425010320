"""Monte Carlo walk estimators checked against the lattice oracle."""

from __future__ import annotations

import math

import numpy as np
import pytest

from bprelab.environment.families import drift_ensemble
from bprelab.errors import DomainError, InsufficientAcceptance
from bprelab.walk.estimators import (
    conditioned_walk_samples,
    estimate_sigma2,
    estimate_V,
    local_limit_cells,
    tau_tail_table,
)
from bprelab.walk.lattice import lattice_walk

LN2 = math.log(2.0)


class TestSigma2:
    def test_lattice_variance(self, lattice):
        est = estimate_sigma2(lattice, 32, 4000, rng=11, burn_in=8)
        assert est.within(LN2**2, k=4.0)

    def test_constant_drift_has_no_spread(self):
        # S_n = n ln 2 exactly, so S_n^2 / n = n (ln 2)^2
        est = estimate_sigma2(drift_ensemble(r=2.0), 10, 50, rng=1, burn_in=0)
        assert est.value == pytest.approx(10 * LN2**2)
        assert est.stderr == pytest.approx(0.0, abs=1e-12)

    def test_rejects_zero_horizon(self, lattice):
        with pytest.raises(DomainError):
            estimate_sigma2(lattice, 0, 10)


class TestTauTail:
    def test_matches_exact_survival(self, lattice):
        walk = lattice_walk(lattice)
        table = tau_tail_table(lattice, None, 0.0, [4, 16, 64], 20_000, rng=3)
        for n, est in zip(table.horizons, table.survival):
            assert est.within(walk.survival(0.0, n), k=4.0)

    def test_scaled_column(self, lattice):
        table = tau_tail_table(lattice, None, 0.0, [4, 16], 500, rng=3)
        for n, s, c in zip(table.horizons, table.survival, table.scaled):
            assert c.value == pytest.approx(math.sqrt(n) * s.value)
        surv, scaled = table.tables()
        assert surv.name == "tau_tail"
        assert [r.n for r in scaled.rows] == [4, 16]

    def test_horizons_must_increase(self, lattice):
        with pytest.raises(DomainError, match="strictly increasing"):
            tau_tail_table(lattice, None, 0.0, [16, 4], 10)


class TestEstimateV:
    def test_root_value_from_zero(self, lattice):
        # E[S_n; tau > n] is h/2 for every n >= 1 when the walk starts at 0
        est = estimate_V(lattice, None, 0.0, 16, 20_000, rng=5)
        assert est.estimate.within(LN2 / 2.0, k=4.0)
        assert sorted(est.curve) == [4, 8, 16]
        assert est.significant

    def test_positive_start(self, lattice):
        est = estimate_V(lattice, None, 2.0 * LN2, 8, 20_000, rng=5)
        assert est.estimate.within(2.0 * LN2, k=4.0)

    def test_rejects_negative_start(self, lattice):
        with pytest.raises(DomainError, match="a >= 0"):
            estimate_V(lattice, None, -0.1, 8, 10)

    def test_to_dict(self, lattice):
        out = estimate_V(lattice, None, 0.0, 4, 100, rng=5).to_dict()
        assert set(out["curve"]) == {"1", "2", "4"}
        assert out["N"] == 100


class TestConditionedSamples:
    def test_values_are_positive(self, lattice):
        sample = conditioned_walk_samples(lattice, None, 0.0, 16, 2000, rng=7, min_accepted=10)
        assert sample.accepted > 10
        assert np.all(sample.values > 0)
        assert sample.acceptance.n == 2000

    def test_dying_walk_raises(self):
        shrinking = drift_ensemble(r=0.5)
        with pytest.raises(InsufficientAcceptance) as exc_info:
            conditioned_walk_samples(shrinking, None, 0.0, 4, 50, rng=7)
        assert exc_info.value.details["accepted"] == 0
        assert exc_info.value.details["required"] == 100


class TestLocalLimitCells:
    def test_matches_exact_cells(self, lattice):
        walk = lattice_walk(lattice)
        cells = local_limit_cells(lattice, None, 0.0, [0.0, 1.0, 2.0], 32, 20_000, rng=13)
        for cell in cells:
            assert cell.probability.within(walk.cell(0.0, 32, cell.b), k=4.0)
        assert cells[1].scaled.value == pytest.approx(32**1.5 * cells[1].probability.value)

    def test_rejects_negative_level(self, lattice):
        with pytest.raises(DomainError, match="cell levels"):
            local_limit_cells(lattice, None, 0.0, [-1.0], 8, 10)
