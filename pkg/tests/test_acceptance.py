"""End-to-end runs of the shipped experiment configs.

These use the full replica budgets and are deselected by default; run with
``pytest -m slow``.
"""

from __future__ import annotations

import time

import numpy as np
import pytest

from bprelab.branching.population import PopulationBatch, PopulationVector
from bprelab.branching.survival import exact_quenched_survival
from bprelab.config import load_config
from bprelab.estimates import proportion_estimate
from bprelab.harness.report import ProvenanceLog
from bprelab.harness.runner import run_experiment
from bprelab.matrix.invariants import run_suite
from bprelab.walk.lattice import lattice_walk

pytestmark = pytest.mark.slow


@pytest.fixture
def shipped(lattice_file, tmp_path, monkeypatch):
    for name in ("BPRELAB_SEED", "BPRELAB_CONFIG", "BPRELAB_WORKERS"):
        monkeypatch.delenv(name, raising=False)
    configs = lattice_file.parent.parent / "configs"

    def _run(kind: str, **overrides):
        config = load_config(
            {"_config_path": str(configs / f"{kind}.json"), "workers": 4, "out_dir": str(tmp_path), **overrides}
        )
        return run_experiment(config, ProvenanceLog.in_dir(tmp_path))

    return _run


class TestShippedConfigs:
    def test_tau_tail_matches_exact_lattice(self, shipped):
        report = shipped("tau-tail")
        tables = {t.name: t for t in report.tables}
        for mc, exact in zip(tables["tau_tail"].rows, tables["tau_tail_exact"].rows):
            assert mc.n == exact.n
            assert abs(mc.estimate - exact.estimate) <= 4 * mc.stderr + 1e-12

    def test_validate_reports_every_hypothesis(self, shipped):
        report = shipped("validate")
        names = {v.name for v in report.verdicts}
        assert {"hypothesis_G", "hypothesis_H2", "hypothesis_H3", "hypothesis_H4", "hypothesis_H5"} <= names
        assert report.hypotheses["results"]["G"]["status"] == "pass"

    def test_lyapunov_is_critical(self, shipped):
        report = shipped("lyapunov")
        last = report.tables[0].rows[-1]
        assert abs(last.estimate) <= 4 * last.stderr + 1e-12

    def test_conditioned_walk_is_rayleigh_at_1024(self, shipped):
        report = shipped("rayleigh-walk", horizons=[1024], N=800_000, min_accepted=10_000)
        verdict = {v.name: v for v in report.verdicts}["rayleigh_walk_n1024"]
        assert verdict.passed
        assert verdict.statistic <= 0.05
        assert report.results["rayleigh_walk"]["1024"]["n"] >= 10_000

    def test_log_population_is_rayleigh_and_coupling_shrinks(self, shipped):
        report = shipped("rayleigh-logpop", horizons=[256, 1024])
        verdicts = {v.name: v for v in report.verdicts}
        assert verdicts["rayleigh_logpop_n1024"].statistic <= 0.07
        assert verdicts["coupling_decreasing"].passed

    def test_local_limit_at_two_horizons(self, shipped):
        report = shipped("local-limit", horizons=[64, 256], N=1_000_000)
        verdicts = [v for v in report.verdicts if v.name.startswith("local_limit_b")]
        assert len(verdicts) == 3
        assert all(v.passed for v in verdicts)


class TestExactAgreement:
    @staticmethod
    def _cases(lattice, three_type, count=20):
        draw = np.random.default_rng(20240601)
        for i in range(count):
            ens = lattice if i % 2 == 0 else three_type
            n = int(draw.integers(1, 11))
            atoms = draw.integers(0, ens.size, n)
            z = tuple(int(v) for v in draw.integers(0, 3, ens.p))
            if sum(z) == 0:
                z = (1,) + z[1:]
            yield ens, atoms, z

    def test_simulated_survival_matches_backward_composition(self, lattice, three_type):
        N = 1_000_000
        rng = np.random.default_rng(7)
        agree = 0
        for ens, atoms, z in self._cases(lattice, three_type):
            exact = exact_quenched_survival([ens.laws[a] for a in atoms], z, len(atoms))
            pops = PopulationBatch.start(PopulationVector.of(z), N)
            for a in atoms:
                pops.advance(ens, np.full(N, a), rng)
            est = proportion_estimate(pops.alive())
            agree += abs(est.value - exact) <= 4.0 * max(est.stderr, 1.0 / N)
        assert agree >= 19

    def test_lattice_local_limit_is_flat(self, lattice):
        walk = lattice_walk(lattice)
        for b in (0, 1, 2):
            scaled = np.array([n**1.5 * walk.cell(0.1, n, b) for n in (64, 256, 1024)])
            assert scaled.min() > 0
            assert scaled.max() / scaled.min() <= 3.0

    def test_matrix_invariant_suite(self):
        start = time.perf_counter()
        results = run_suite(np.random.default_rng(0), cases=1000)
        elapsed = time.perf_counter() - start
        assert all(r.passed for r in results)
        assert min(r.cases for r in results[:3]) == 1000
        assert elapsed < 10.0
