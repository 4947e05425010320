"""Tests for normalized populations on a fixed environment."""

from __future__ import annotations

import math

import numpy as np
import pytest

from bprelab.branching.kesten_stigum import (
    convergence_series,
    fixed_environment,
    kesten_stigum_diagnostics,
    trace_products,
)
from bprelab.errors import DomainError


class TestFixedEnvironment:
    def test_reproducible_from_seed(self, lattice):
        a = fixed_environment(lattice, 40, seed=7)
        b = fixed_environment(lattice, 40, seed=7)
        np.testing.assert_array_equal(a, b)
        assert a.dtype == np.int64
        assert not np.array_equal(a, fixed_environment(lattice, 40, seed=8))

    def test_rejects_empty(self, lattice):
        with pytest.raises(DomainError):
            fixed_environment(lattice, 0, seed=7)


class TestTraceProducts:
    def test_doubling_products(self, doubling):
        trace = trace_products(doubling, [0, 0, 0])
        assert trace.length == 3
        np.testing.assert_allclose(trace.entries(2), np.full((2, 2), 8.0))
        np.testing.assert_allclose(trace.log_columns(3), 3 * math.log(4.0))
        assert trace.log_norm(0) == pytest.approx(math.log(2.0))

    def test_mean_series(self, doubling):
        atoms = [0] * 6
        trace = trace_products(doubling, atoms)
        variance, mean = convergence_series(doubling, atoms, trace, 4)
        np.testing.assert_allclose(variance, 0.0)
        expected = sum(1.0 / (2.0 * 4.0 ** (n - 1)) for n in range(1, 5))
        np.testing.assert_allclose(mean[-1], expected)
        np.testing.assert_allclose(mean[0], 0.0)

    def test_series_needs_long_sequence(self, doubling):
        trace = trace_products(doubling, [0, 0])
        with pytest.raises(DomainError, match="too short"):
            convergence_series(doubling, [0, 0], trace, 4)


class TestDiagnostics:
    def test_doubling_normalizer(self, doubling):
        report = kesten_stigum_diagnostics(doubling, [0] * 17, (1, 0), [2, 4, 8], 20, rng=3)
        for row in report.w_mean:
            for est in row:
                assert est.value == pytest.approx(0.5)
        np.testing.assert_allclose(report.w_var, 0.0, atol=1e-20)
        assert report.nonnegative
        assert report.exact_extinction == 0.0
        assert report.mc_extinction.value == 0.0
        assert report.coincidence is None
        assert any("no replica" in note for note in report.notes)

    def test_supercritical_environment(self, supercritical):
        env = fixed_environment(supercritical, 33, seed=7)
        report = kesten_stigum_diagnostics(supercritical, env, (1, 0), [4, 8, 16], 2000, rng=3, env_seed=7)
        assert report.nonnegative
        assert report.mc_extinction.within(report.exact_extinction, k=4.0)
        out = report.to_dict()
        assert out["env_seed"] == 7
        assert len(out["l2_cauchy"]) == 3
        names = [t.name for t in report.tables()]
        assert names[:2] == ["w_mean_0", "w_mean_1"]
        assert "mean_series" in names

    def test_environment_too_short(self, doubling):
        with pytest.raises(DomainError, match="at least 17"):
            kesten_stigum_diagnostics(doubling, [0] * 16, (1, 0), [2, 8], 10)

    def test_horizons_must_be_positive(self, doubling):
        with pytest.raises(DomainError, match="positive"):
            kesten_stigum_diagnostics(doubling, [0] * 17, (1, 0), [0, 8], 10)
