"""Validators of the environment hypotheses.

Finite mixtures make most hypotheses exactly decidable: moment conditions
become finite weighted sums over atoms. Strong irreducibility is only
checked through a sufficient condition, and criticality through Monte Carlo.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Any

import numpy as np

from bprelab.environment.ensemble import EnvironmentEnsemble
from bprelab.environment.lyapunov import estimate_lyapunov
from bprelab.errors import DegenerateMatrix, DomainError
from bprelab.matrix.core import cond_bound, in_class_B
from bprelab.offspring.moments import validate_class
from bprelab.streams import ReplicaStreams, as_streams

logger = logging.getLogger(__name__)

PROPORTIONAL_TOL = 1e-12


class HypothesisStatus(str, Enum):
    PASS = "pass"
    FAIL = "fail"
    SUFFICIENT_CONDITION_PASS = "sufficient-condition-pass"
    INCONCLUSIVE = "inconclusive"


@dataclass
class HypothesisResult:
    """Status of one hypothesis with the numeric witness that decided it."""

    name: str
    status: HypothesisStatus
    witness: dict[str, Any]

    @property
    def blocking(self) -> bool:
        """Only an outright failure blocks an experiment."""
        return self.status == HypothesisStatus.FAIL

    def to_dict(self) -> dict[str, Any]:
        return {"name": self.name, "status": self.status.value, "witness": self.witness}


@dataclass
class HypothesisReport:
    delta: float
    epsilon: float
    K: float
    results: dict[str, HypothesisResult] = field(default_factory=dict)

    def add(self, result: HypothesisResult) -> None:
        self.results[result.name] = result

    def status(self, name: str) -> HypothesisStatus:
        return self.results[name].status

    def failing(self, names: list[str] | None = None) -> list[str]:
        chosen = names if names is not None else list(self.results)
        return [n for n in chosen if n in self.results and self.results[n].blocking]

    def to_dict(self) -> dict[str, Any]:
        return {
            "delta": self.delta,
            "epsilon": self.epsilon,
            "K": self.K,
            "results": {k: v.to_dict() for k, v in self.results.items()},
        }


def _status(ok: bool) -> HypothesisStatus:
    return HypothesisStatus.PASS if ok else HypothesisStatus.FAIL


def check_h1(ens: EnvironmentEnsemble, delta: float) -> HypothesisResult:
    """``E[|ln n(M)|^(2 + delta)]`` as a finite weighted sum."""
    total = 0.0
    for w, m in zip(ens.weights, ens.mean_matrices):
        if w == 0:
            continue
        try:
            total += float(w) * abs(np.log(cond_bound(m))) ** (2.0 + delta)
        except DegenerateMatrix:
            total = float("inf")
            break
    return HypothesisResult("H1", _status(np.isfinite(total)), {"moment": total})


def _proportional(a: np.ndarray, b: np.ndarray) -> bool:
    return bool(np.allclose(a / a.sum(), b / b.sum(), rtol=0.0, atol=PROPORTIONAL_TOL))


def check_h2(ens: EnvironmentEnsemble) -> HypothesisResult:
    """Sufficient condition: positive mean matrices and two non-proportional atoms."""
    support = [m for w, m in zip(ens.weights, ens.mean_matrices) if w > 0]
    positive = all(float(m.min()) > 0 for m in support)
    distinct = any(
        not _proportional(support[i], support[j])
        for i in range(len(support))
        for j in range(i + 1, len(support))
    )
    status = (
        HypothesisStatus.SUFFICIENT_CONDITION_PASS
        if positive and distinct
        else HypothesisStatus.INCONCLUSIVE
    )
    return HypothesisResult("H2", status, {"all_positive": positive, "non_proportional_pair": distinct})


def check_h3(ens: EnvironmentEnsemble, delta: float) -> HypothesisResult:
    """Every atom's mean matrix lies in S+(1/delta)."""
    ratios = []
    for m in ens.mean_matrices:
        lo = float(m.min())
        ratios.append(float(m.max()) / lo if lo > 0 else float("inf"))
    ok = all(in_class_B(m, 1.0 / delta) for m in ens.mean_matrices)
    return HypothesisResult("H3", _status(ok), {"max_entry_ratio": max(ratios), "B": 1.0 / delta})


def check_h4(
    ens: EnvironmentEnsemble, streams: ReplicaStreams, n: int, N: int, sigmas: float = 3.0
) -> HypothesisResult:
    """Monte Carlo criticality at the ``sigmas`` level."""
    est = estimate_lyapunov(ens, n, N, streams)
    ok = abs(est.value) <= sigmas * est.stderr + 1e-12
    return HypothesisResult("H4", _status(ok), {"pi": est.value, "stderr": est.stderr, "N": est.n})


def check_h5(ens: EnvironmentEnsemble, delta: float) -> HypothesisResult:
    """Some atom of positive weight has ``min_x ln |xM| = ln(min row sum) >= delta``.

    ``|xM|`` is linear in ``x`` on the simplex, so its minimum is the
    smallest row sum.
    """
    logs = []
    for w, m in zip(ens.weights, ens.mean_matrices):
        r = float(m.sum(axis=1).min())
        logs.append(np.log(r) if (w > 0 and r > 0) else -np.inf)
    best = int(np.argmax(logs))
    witness = {
        "atom": best,
        "min_row_sum": float(ens.mean_matrices[best].sum(axis=1).min()),
        "log_min_row_sum": float(logs[best]),
        "mass": float(sum(w for w, l in zip(ens.weights, logs) if l >= delta)),
    }
    return HypothesisResult("H5", _status(logs[best] >= delta), witness)


def check_h6(ens: EnvironmentEnsemble) -> HypothesisResult:
    """``E[(mu / |M|^2)(1 + ln+ |M|)]`` as a finite weighted sum."""
    total = 0.0
    for w, s in zip(ens.weights, ens.summaries):
        if w == 0:
            continue
        total += float(w) * s.eta_g * (1.0 + max(np.log(s.norm), 0.0) if s.norm > 0 else float("inf"))
    return HypothesisResult("H6", _status(np.isfinite(total)), {"moment": total})


def check_class(ens: EnvironmentEnsemble, epsilon: float, K: float) -> HypothesisResult:
    """Class check on every atom of positive weight."""
    reports = {
        str(a): validate_class(law, epsilon, K)
        for a, (w, law) in enumerate(zip(ens.weights, ens.laws))
        if w > 0
    }
    ok = all(r.passed() for r in reports.values())
    witness = {
        a: {
            "two_children_min": min(c.value for c in r.checks if c.condition == "two_children"),
            "zero_offspring_min": min(c.value for c in r.checks if c.condition == "zero_offspring"),
            "second_moment_max": max(c.value for c in r.checks if c.condition == "second_moment"),
        }
        for a, r in reports.items()
    }
    return HypothesisResult("G", _status(ok), witness)


def validate_hypotheses(
    ens: EnvironmentEnsemble,
    delta: float,
    epsilon: float,
    K: float,
    rng: ReplicaStreams | int | None = None,
    n: int = 256,
    N: int = 4096,
) -> HypothesisReport:
    """Evaluate H1..H6 and the offspring class; only H4 uses randomness."""
    if not 0.0 < delta <= 1.0:
        raise DomainError(f"delta must lie in (0, 1], got {delta}")
    streams = as_streams(rng, "hypotheses")
    report = HypothesisReport(delta=delta, epsilon=epsilon, K=K)
    report.add(check_h1(ens, delta))
    report.add(check_h2(ens))
    report.add(check_h3(ens, delta))
    report.add(check_h4(ens, streams, n, N))
    report.add(check_h5(ens, delta))
    report.add(check_h6(ens))
    report.add(check_class(ens, epsilon, K))
    for r in report.results.values():
        logger.debug("hypothesis %s: %s %s", r.name, r.status.value, r.witness)
    return report
