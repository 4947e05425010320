"""Tests for the exact lattice oracle."""

from __future__ import annotations

import math

import numpy as np
import pytest

from bprelab.environment.families import scaled_geometric_ensemble
from bprelab.errors import DomainError
from bprelab.walk.lattice import LatticeWalk, lattice_walk


@pytest.fixture
def unit_walk() -> LatticeWalk:
    return LatticeWalk(h=1.0, p_up=0.5)


class TestKilledDistributions:
    def test_survival_from_zero(self, unit_walk):
        np.testing.assert_allclose(unit_walk.survival_curve(0.0, 4), [1.0, 0.5, 0.25, 0.25, 3.0 / 16.0])

    def test_survival_from_one(self, unit_walk):
        # from 1: up to 2 or down to 0, which is killed
        assert unit_walk.survival(1.0, 1) == pytest.approx(0.5)

    def test_sqrt_n_survival_is_flat(self, unit_walk):
        ns = [256, 512, 1024]
        scaled = [math.sqrt(n) * unit_walk.survival(0.0, n) for n in ns]
        assert max(scaled) / min(scaled) < 1.01
        assert scaled[-1] == pytest.approx(1.0 / math.sqrt(2.0 * math.pi), rel=0.01)

    def test_killed_distribution_support(self, unit_walk):
        values, probs = unit_walk.killed_distribution(0.0, 3)
        np.testing.assert_allclose(values, [1.0, 3.0])
        np.testing.assert_allclose(probs, [0.125, 0.125])

    def test_conditional_cdf(self, unit_walk):
        cdf = unit_walk.conditional_cdf(0.0, 3, [0.0, 1.0, 10.0])
        np.testing.assert_allclose(cdf, [0.0, 0.5, 1.0])

    def test_cell(self, unit_walk):
        assert unit_walk.cell(0.0, 3, 1.0) == pytest.approx(0.125)
        assert unit_walk.cell(0.0, 3, 2.0) == pytest.approx(0.0)

    def test_rejects_negative_start(self, unit_walk):
        with pytest.raises(DomainError):
            unit_walk.killed_distributions(-1.0, 3)

    def test_sigma2(self):
        assert LatticeWalk(h=2.0, p_up=0.5).sigma2 == pytest.approx(4.0)
        assert LatticeWalk(h=1.0, p_up=0.75).sigma2 == pytest.approx(0.75)


class TestHarmonic:
    def test_closed_form(self, unit_walk):
        np.testing.assert_allclose(unit_walk.harmonic([0.0, 1.0, 3.0, 2.5]), [0.5, 1.0, 3.0, 3.0])

    @pytest.mark.parametrize("a", [0.0, 1.0, 2.0, 0.3, 4.7])
    def test_is_harmonic(self, unit_walk, a):
        # one step of the killed walk preserves V
        v = unit_walk.harmonic(a)
        up = unit_walk.harmonic(a + 1.0)
        down = unit_walk.harmonic(a - 1.0) if a - 1.0 > 1e-9 else 0.0
        assert 0.5 * up + 0.5 * down == pytest.approx(v)

    def test_doob_expectation_of_one(self, unit_walk):
        for k in (1, 3, 10):
            assert unit_walk.doob_expectation(0.0, k, np.ones_like) == pytest.approx(1.0)

    def test_needs_symmetry(self):
        with pytest.raises(DomainError, match="p_up = 1/2"):
            LatticeWalk(h=1.0, p_up=0.6).harmonic(1.0)

    def test_series_terms_start(self, unit_walk):
        terms, eta_terms = unit_walk.series_terms(1.0, 4)
        assert terms[0] == pytest.approx(math.exp(-1.0))
        assert terms.shape == eta_terms.shape == (5,)
        np.testing.assert_allclose(eta_terms, 0.0)


class TestLatticeWalkOf:
    def test_canonical_lattice(self, lattice):
        walk = lattice_walk(lattice)
        assert walk is not None
        assert walk.h == pytest.approx(math.log(2.0))
        assert walk.symmetric
        assert walk.eta_up > 0 and walk.eta_down > 0

    def test_asymmetric_weights(self, supercritical):
        walk = lattice_walk(supercritical)
        assert walk.p_up == pytest.approx(0.75)
        assert not walk.symmetric

    def test_non_lattice(self):
        ens = scaled_geometric_ensemble([np.array([[1.0, 0.5], [0.2, 0.3]])], q0=0.25)
        assert lattice_walk(ens) is None

    def test_single_growing_atom(self, doubling):
        # all steps are +ln 4: h is defined but there is no down step
        walk = lattice_walk(doubling)
        assert walk.p_up == 1.0
