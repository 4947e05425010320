"""Exact moment summaries and the non-degeneracy class check of offspring laws."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

import numpy as np

from bprelab.errors import DomainError
from bprelab.offspring.laws import OffspringLaw


@dataclass(frozen=True, eq=False)
class MomentSummary:
    """Mean matrix, Hessians at 1, variances and the derived scalars ``mu`` and ``eta``."""

    mean_matrix: np.ndarray
    hessians: np.ndarray
    sigma2: np.ndarray
    mu_g: float
    eta_g: float

    @property
    def norm(self) -> float:
        return float(self.mean_matrix.sum())

    def to_dict(self) -> dict[str, Any]:
        return {
            "mean_matrix": self.mean_matrix.tolist(),
            "hessians": self.hessians.tolist(),
            "sigma2": self.sigma2.tolist(),
            "mu_g": self.mu_g,
            "eta_g": self.eta_g,
        }


def moments(law: OffspringLaw) -> MomentSummary:
    """Exact moments from the finite support.

    ``B^(i)(k, l) = E[xi(i, k)(xi(i, l) - delta_kl)]`` and
    ``sigma2(i, j) = B^(i)(j, j) + M(i, j) - M(i, j)^2``.
    """
    mean = law.mean_matrix()
    hessians = np.stack([row.factorial_moments() for row in law.rows])
    hessians = 0.5 * (hessians + np.transpose(hessians, (0, 2, 1)))
    diag = np.stack([np.diag(h) for h in hessians])
    sigma2 = diag + mean - mean**2
    mu_g = float(np.abs(hessians).sum())
    norm = float(mean.sum())
    eta_g = mu_g / norm**2 if norm > 0 else float("inf")
    return MomentSummary(mean, hessians, sigma2, mu_g, eta_g)


# ---------------------------------------------------------------------------
# Non-degeneracy class G(eps, K)
# ---------------------------------------------------------------------------


@dataclass
class ConditionCheck:
    """One condition evaluated at one index (parent type, or parent/child pair)."""

    condition: str
    index: tuple[int, ...]
    value: float
    bound: float
    passed: bool

    def to_dict(self) -> dict[str, Any]:
        return {
            "condition": self.condition,
            "index": list(self.index),
            "value": self.value,
            "bound": self.bound,
            "passed": self.passed,
        }


@dataclass
class ClassReport:
    """Per-condition, per-index report of the class check."""

    epsilon: float
    K: float
    checks: list[ConditionCheck] = field(default_factory=list)

    def passed(self, condition: str | None = None) -> bool:
        return all(c.passed for c in self.checks if condition is None or c.condition == condition)

    def to_dict(self) -> dict[str, Any]:
        return {
            "epsilon": self.epsilon,
            "K": self.K,
            "passed": self.passed(),
            "checks": [c.to_dict() for c in self.checks],
        }


def second_moment_of_size(law: OffspringLaw, i: int) -> float:
    """``E[|xi(i, .)|^2]`` exactly."""
    row = law.row(i)
    return float(row.factorial_moments().sum() + row.first_moments().sum())


def validate_class(law: OffspringLaw, epsilon: float, K: float) -> ClassReport:
    """Check the three class conditions exactly.

    1. ``P(xi(i, j) >= 2) >= eps`` for every ``i, j``;
    2. ``P(xi(i, .) = 0) >= eps`` for every ``i``;
    3. ``E[|xi(i, .)|^2] <= K`` for every ``i``.
    """
    if not 0.0 < epsilon < 1.0:
        raise DomainError(f"epsilon must lie in (0, 1), got {epsilon}")
    if K <= 0:
        raise DomainError(f"K must be positive, got {K}")
    report = ClassReport(epsilon=epsilon, K=K)
    for i, row in enumerate(law.rows):
        two = row.prob_at_least_two()
        for j in range(law.p):
            report.checks.append(
                ConditionCheck("two_children", (i, j), float(two[j]), epsilon, bool(two[j] >= epsilon))
            )
    for i, row in enumerate(law.rows):
        z = row.prob_zero()
        report.checks.append(ConditionCheck("zero_offspring", (i,), z, epsilon, z >= epsilon))
    for i in range(law.p):
        m2 = second_moment_of_size(law, i)
        report.checks.append(ConditionCheck("second_moment", (i,), m2, K, m2 <= K))
    return report
