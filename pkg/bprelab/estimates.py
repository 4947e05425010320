"""Estimate records shared by every estimator."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Any

import numpy as np


@dataclass(frozen=True)
class Estimate:
    """A Monte Carlo estimate with its standard error and sample count."""

    value: float
    stderr: float
    n: int

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)

    def within(self, target: float, k: float = 3.0) -> bool:
        """True when ``target`` is within ``k`` standard errors."""
        return abs(self.value - target) <= k * self.stderr

    def __iter__(self):
        # Allows ``value, stderr = estimate`` at call sites.
        yield self.value
        yield self.stderr


def mean_estimate(samples: np.ndarray) -> Estimate:
    """Sample mean with the usual ``s / sqrt(N)`` standard error.

    numpy's ``sum`` on a contiguous array is pairwise, so the reduction
    order is fixed by the replica order alone.
    """
    x = np.ascontiguousarray(samples, dtype=float).ravel()
    n = x.size
    if n == 0:
        return Estimate(float("nan"), float("nan"), 0)
    mean = float(np.sum(x) / n)
    if n < 2:
        return Estimate(mean, float("inf"), n)
    var = float(np.sum((x - mean) ** 2) / (n - 1))
    return Estimate(mean, float(np.sqrt(var / n)), n)


def proportion_estimate(hits: np.ndarray) -> Estimate:
    """Binomial proportion with standard error ``sqrt(p(1-p)/N)``."""
    x = np.ascontiguousarray(hits, dtype=float).ravel()
    n = x.size
    if n == 0:
        return Estimate(float("nan"), float("nan"), 0)
    p = float(np.sum(x) / n)
    return Estimate(p, float(np.sqrt(max(p * (1.0 - p), 0.0) / n)), n)


# ---------------------------------------------------------------------------
# Tables and conditioned samples
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TableRow:
    """One CSV row: horizon (or other key), estimate, stderr and sample count."""

    n: float
    estimate: float
    stderr: float
    N: int

    @classmethod
    def of(cls, n: float, est: Estimate) -> TableRow:
        return cls(n, est.value, est.stderr, est.n)

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)


@dataclass
class EstimateTable:
    """A named table of estimates, emitted as CSV by the harness."""

    name: str
    rows: list[TableRow] = field(default_factory=list)

    def add(self, n: float, est: Estimate) -> None:
        self.rows.append(TableRow.of(n, est))

    def values(self) -> np.ndarray:
        return np.array([r.estimate for r in self.rows])

    def keys(self) -> np.ndarray:
        return np.array([r.n for r in self.rows], dtype=float)

    def to_dict(self) -> dict[str, Any]:
        return {"name": self.name, "rows": [r.to_dict() for r in self.rows]}


@dataclass(frozen=True, eq=False)
class ConditionedSample:
    """Values kept by rejection sampling, with the acceptance rate."""

    values: np.ndarray
    acceptance: Estimate

    @property
    def accepted(self) -> int:
        return int(self.values.size)

    def to_dict(self) -> dict[str, Any]:
        return {"accepted": self.accepted, "acceptance": self.acceptance.to_dict()}


def flatness(values: np.ndarray) -> float:
    """``max / min`` of a positive sequence; ``inf`` if any value is non-positive."""
    v = np.asarray(values, dtype=float)
    if v.size == 0 or np.any(v <= 0):
        return float("inf")
    return float(v.max() / v.min())


# ---------------------------------------------------------------------------
# Column moments reduced block by block
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class ColumnMoments:
    """Count, per-column mean and sum of squared deviations of one block."""

    count: int
    mean: np.ndarray
    m2: np.ndarray


def column_moments(samples: np.ndarray) -> ColumnMoments:
    x = np.asarray(samples, dtype=float)
    mean = x.mean(axis=0)
    return ColumnMoments(x.shape[0], mean, ((x - mean) ** 2).sum(axis=0))


def combine_moments(parts: list[ColumnMoments]) -> list[Estimate]:
    """Merge block moments in block order into one estimate per column."""
    if not parts:
        return []
    n, mean, m2 = parts[0].count, parts[0].mean.copy(), parts[0].m2.copy()
    for part in parts[1:]:
        total = n + part.count
        delta = part.mean - mean
        mean = mean + delta * (part.count / total)
        m2 = m2 + part.m2 + delta**2 * (n * part.count / total)
        n = total
    if n < 2:
        return [Estimate(float(v), float("inf"), n) for v in mean]
    stderr = np.sqrt(m2 / (n - 1) / n)
    return [Estimate(float(v), float(s), n) for v, s in zip(mean, stderr)]
