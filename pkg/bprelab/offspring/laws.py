"""Offspring laws with finite support.

A law gives, for every parent type ``i``, a distribution over offspring
count rows in N^p. Two row kinds exist:

* :class:`FiniteTableRow`: an explicit list of atoms and probabilities;
* :class:`ZeroInflatedGeometricRow`: zero with probability ``q0``, otherwise
  independent per-child-type truncated geometric counts.

Finite support makes every generating function an exact polynomial.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Sequence, Union

import numpy as np
from numpy.polynomial import polynomial as P

from bprelab.errors import DomainError

PROB_TOL = 1e-12
DEFAULT_CAP = 64


def _check_probs(probs: np.ndarray, what: str) -> np.ndarray:
    if np.any(probs < 0) or not np.all(np.isfinite(probs)):
        raise DomainError(f"{what}: probabilities must be finite and non-negative")
    total = float(probs.sum())
    if abs(total - 1.0) > PROB_TOL:
        raise DomainError(f"{what}: probabilities sum to {total!r}, expected 1")
    return probs / total


def _check_s(s: np.ndarray) -> None:
    if np.any(s < 0) or np.any(s > 1) or not np.all(np.isfinite(s)):
        raise DomainError("generating functions are evaluated on [0, 1]^p only")


def truncated_geometric_pmf(mean: float, cap: int) -> np.ndarray:
    """Geometric law on {0, 1, ...} with the given mean, tail mass moved into ``cap``."""
    if mean < 0:
        raise DomainError(f"geometric mean parameter must be >= 0, got {mean}")
    if cap < 1:
        raise DomainError(f"cap must be >= 1, got {cap}")
    theta = mean / (1.0 + mean)
    k = np.arange(cap + 1)
    pmf = (1.0 - theta) * theta**k
    pmf[cap] = theta**cap
    return pmf


# ---------------------------------------------------------------------------
# Row kinds
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class FiniteTableRow:
    """Explicit atoms ``alpha`` (rows of ``support``) with probabilities."""

    support: np.ndarray
    probs: np.ndarray

    kind = "table"

    def __post_init__(self) -> None:
        sup = np.array(self.support, dtype=np.int64)
        if sup.ndim != 2 or sup.shape[0] == 0:
            raise DomainError("table row needs a non-empty (K, p) support")
        if np.any(sup < 0):
            raise DomainError("table row support must be non-negative integers")
        probs = _check_probs(np.array(self.probs, dtype=float).ravel(), "table row")
        if probs.size != sup.shape[0]:
            raise DomainError("table row: one probability per atom required")
        sup.setflags(write=False)
        probs.setflags(write=False)
        object.__setattr__(self, "support", sup)
        object.__setattr__(self, "probs", probs)

    @property
    def p(self) -> int:
        return self.support.shape[1]

    def gf(self, s: np.ndarray) -> np.ndarray:
        """``sum_alpha p(alpha) s^alpha`` for ``s`` of shape (..., p); 0^0 = 1."""
        s = np.asarray(s, dtype=float)
        mono = np.prod(s[..., None, :] ** self.support, axis=-1)
        return mono @ self.probs

    def sample_sum(self, counts: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        """Sum of ``counts[r]`` independent rows, for every ``r``."""
        counts = np.asarray(counts, dtype=np.int64)
        if counts.size == 0:
            return np.zeros((0, self.p), dtype=np.int64)
        hits = rng.multinomial(counts, self.probs)
        return hits @ self.support

    def first_moments(self) -> np.ndarray:
        return self.probs @ self.support.astype(float)

    def factorial_moments(self) -> np.ndarray:
        """``E[xi_k (xi_l - delta_kl)]``."""
        a = self.support.astype(float)
        second = np.einsum("a,ak,al->kl", self.probs, a, a)
        return second - np.diag(self.first_moments())

    def prob_zero(self) -> float:
        return float(self.probs[np.all(self.support == 0, axis=1)].sum())

    def prob_at_least_two(self) -> np.ndarray:
        return np.array([float(self.probs[self.support[:, j] >= 2].sum()) for j in range(self.p)])

    def max_coordinate(self) -> int:
        return int(self.support.max())


@dataclass(frozen=True, eq=False)
class ZeroInflatedGeometricRow:
    """Zero row with probability ``q0``; otherwise independent truncated geometrics.

    ``means`` are the pre-truncation mean parameters; moments are always the
    realized post-truncation values.
    """

    q0: float
    means: np.ndarray
    cap: int = DEFAULT_CAP
    pmfs: np.ndarray = field(init=False, repr=False)

    kind = "zero_inflated_geometric"

    def __post_init__(self) -> None:
        if not 0.0 <= self.q0 <= 1.0:
            raise DomainError(f"q0 must lie in [0, 1], got {self.q0}")
        means = np.array(self.means, dtype=float).ravel()
        pmfs = np.stack([truncated_geometric_pmf(m, self.cap) for m in means])
        means.setflags(write=False)
        pmfs.setflags(write=False)
        object.__setattr__(self, "means", means)
        object.__setattr__(self, "pmfs", pmfs)

    @property
    def p(self) -> int:
        return self.means.size

    def scaled(self, factor: float) -> ZeroInflatedGeometricRow:
        return replace(self, means=self.means * factor)

    def gf(self, s: np.ndarray) -> np.ndarray:
        s = np.asarray(s, dtype=float)
        prod = np.ones(s.shape[:-1])
        for j in range(self.p):
            prod = prod * P.polyval(s[..., j], self.pmfs[j])
        return self.q0 + (1.0 - self.q0) * prod

    def sample_sum(self, counts: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        counts = np.asarray(counts, dtype=np.int64)
        out = np.zeros((counts.size, self.p), dtype=np.int64)
        if counts.size == 0:
            return out
        active = rng.binomial(counts, 1.0 - self.q0)
        values = np.arange(self.cap + 1, dtype=np.int64)
        for j in range(self.p):
            out[:, j] = rng.multinomial(active, self.pmfs[j]) @ values
        return out

    def _component_moments(self) -> tuple[np.ndarray, np.ndarray]:
        k = np.arange(self.cap + 1, dtype=float)
        first = self.pmfs @ k
        fact2 = self.pmfs @ (k * (k - 1.0))
        return first, fact2

    def first_moments(self) -> np.ndarray:
        first, _ = self._component_moments()
        return (1.0 - self.q0) * first

    def factorial_moments(self) -> np.ndarray:
        first, fact2 = self._component_moments()
        out = (1.0 - self.q0) * np.outer(first, first)
        np.fill_diagonal(out, (1.0 - self.q0) * fact2)
        return out

    def prob_zero(self) -> float:
        return float(self.q0 + (1.0 - self.q0) * np.prod(self.pmfs[:, 0]))

    def prob_at_least_two(self) -> np.ndarray:
        return (1.0 - self.q0) * self.pmfs[:, 2:].sum(axis=1)

    def max_coordinate(self) -> int:
        return self.cap


OffspringRow = Union[FiniteTableRow, ZeroInflatedGeometricRow]


# ---------------------------------------------------------------------------
# Laws
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class OffspringLaw:
    """One generation's offspring table: a row distribution per parent type."""

    rows: tuple[OffspringRow, ...]

    def __post_init__(self) -> None:
        rows = tuple(self.rows)
        if not rows:
            raise DomainError("an offspring law needs at least one row")
        p = len(rows)
        for i, row in enumerate(rows):
            if row.p != p:
                raise DomainError(f"row {i} has dimension {row.p}, expected {p}")
        object.__setattr__(self, "rows", rows)

    @property
    def p(self) -> int:
        return len(self.rows)

    def row(self, i: int) -> OffspringRow:
        if not 0 <= i < self.p:
            raise DomainError(f"parent type {i} outside 0..{self.p - 1}")
        return self.rows[i]

    def scaled(self, factor: float) -> OffspringLaw:
        """Multiply every geometric mean parameter by ``factor``."""
        rows = []
        for row in self.rows:
            if not isinstance(row, ZeroInflatedGeometricRow):
                raise DomainError("only zero-inflated geometric rows carry a tilt knob")
            rows.append(row.scaled(factor))
        return OffspringLaw(tuple(rows))

    @property
    def tiltable(self) -> bool:
        return all(isinstance(r, ZeroInflatedGeometricRow) for r in self.rows)

    def mean_matrix(self) -> np.ndarray:
        """``M(i, j) = E[xi(i, j)]`` computed exactly from the support."""
        return np.stack([r.first_moments() for r in self.rows])


def table_law(rows: Sequence[Sequence[tuple[Sequence[int], float]]]) -> OffspringLaw:
    """Build a law from ``[(alpha, prob), ...]`` lists, one list per parent type."""
    return OffspringLaw(
        tuple(
            FiniteTableRow(np.array([a for a, _ in row]), np.array([q for _, q in row]))
            for row in rows
        )
    )


def deterministic_law(atoms: Sequence[Sequence[int]]) -> OffspringLaw:
    """Every parent of type ``i`` has exactly ``atoms[i]`` children."""
    return table_law([[(a, 1.0)] for a in atoms])


def geometric_law(q0: Sequence[float], means: np.ndarray, cap: int = DEFAULT_CAP) -> OffspringLaw:
    """Zero-inflated truncated geometric law with mean parameters ``means[i, j]``."""
    means = np.asarray(means, dtype=float)
    return OffspringLaw(
        tuple(ZeroInflatedGeometricRow(float(q0[i]), means[i], cap) for i in range(means.shape[0]))
    )


# ---------------------------------------------------------------------------
# Sampling and generating functions
# ---------------------------------------------------------------------------


def sample_offspring(law: OffspringLaw, i: int, rng: np.random.Generator) -> np.ndarray:
    """One offspring row of a type-``i`` parent."""
    return law.row(i).sample_sum(np.array([1]), rng)[0]


def gf_eval(law: OffspringLaw, i: int, s: Sequence[float] | np.ndarray) -> float:
    """``g^(i)(s)`` evaluated exactly."""
    s = np.asarray(s, dtype=float)
    _check_s(s)
    return float(law.row(i).gf(s))


def gf_vector_eval(law: OffspringLaw, s: Sequence[float] | np.ndarray) -> np.ndarray:
    """``(g^(1)(s), ..., g^(p)(s))``; ``s`` may carry leading batch axes."""
    s = np.asarray(s, dtype=float)
    _check_s(s)
    return np.stack([row.gf(s) for row in law.rows], axis=-1)
