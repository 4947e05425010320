"""Population vectors, one-generation steps and replica batches.

Exact 64-bit counts are kept while ``|Z| <= 2^53``. Above that a replica
switches to log-value tracking of its mean-field recursion
``Z_{k+1} = Z_k M_{k+1}``; the step of the switch is recorded per replica.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np
from scipy.special import logsumexp

from bprelab.environment.ensemble import EnvironmentEnsemble, sample_env_sequence
from bprelab.errors import DomainError, OverflowGuard
from bprelab.matrix.core import SimplexPoint
from bprelab.offspring.laws import OffspringLaw
from bprelab.walk.path import WalkPath, run_walk

logger = logging.getLogger(__name__)

INT64_MAX = 2**63 - 1
EXACT_LIMIT = 2**53
NEVER = -1


@dataclass(frozen=True)
class PopulationVector:
    """Counts per type of one generation."""

    counts: tuple[int, ...]

    def __post_init__(self) -> None:
        counts = tuple(int(c) for c in self.counts)
        if not counts or any(c < 0 for c in counts):
            raise DomainError(f"population counts must be non-negative integers, got {counts}")
        object.__setattr__(self, "counts", counts)

    @classmethod
    def of(cls, counts: Sequence[int] | np.ndarray) -> PopulationVector:
        return cls(tuple(int(c) for c in counts))

    @property
    def p(self) -> int:
        return len(self.counts)

    @property
    def total(self) -> int:
        return sum(self.counts)

    @property
    def is_zero(self) -> bool:
        return self.total == 0

    def as_array(self) -> np.ndarray:
        return np.array(self.counts, dtype=np.int64)

    def direction(self) -> SimplexPoint:
        """``z / |z|``, the projective start associated with ``z``."""
        if self.is_zero:
            raise DomainError("the zero population has no direction")
        return SimplexPoint(np.array(self.counts, dtype=float))


def _guard(counts: np.ndarray, law: OffspringLaw) -> None:
    for l, row in enumerate(law.rows):
        worst = int(counts[..., l].max(initial=0)) * row.max_coordinate()
        if worst > INT64_MAX:
            raise OverflowGuard(
                "offspring sum could exceed the 64-bit range", parent_type=l, parents=int(counts[..., l].max())
            )


def step_population(z: PopulationVector, law: OffspringLaw, rng: np.random.Generator) -> PopulationVector:
    """Each type-``l`` parent draws an independent offspring row; rows are summed."""
    if z.p != law.p:
        raise DomainError(f"population has {z.p} types, law has {law.p}")
    if z.is_zero:
        return z
    counts = z.as_array()
    _guard(counts, law)
    out = np.zeros(law.p, dtype=np.int64)
    for l, row in enumerate(law.rows):
        if counts[l]:
            out += row.sample_sum(counts[l : l + 1], rng)[0]
    if sum(int(c) for c in out) > INT64_MAX:
        raise OverflowGuard("population size exceeds the 64-bit range")
    return PopulationVector.of(out)


# ---------------------------------------------------------------------------
# Trajectories
# ---------------------------------------------------------------------------


@dataclass
class Trajectory:
    """Environment draws, the walk they drive and the population they breed."""

    env_indices: np.ndarray
    walk: WalkPath
    populations: list[PopulationVector] = field(default_factory=list)

    @property
    def survived(self) -> bool:
        return not self.populations[-1].is_zero

    def to_dict(self) -> dict[str, Any]:
        return {
            "env_indices": self.env_indices.tolist(),
            "walk": self.walk.to_dict(),
            "populations": [list(z.counts) for z in self.populations],
            "survived": self.survived,
        }


def simulate_trajectory(
    ens: EnvironmentEnsemble,
    z: PopulationVector,
    n: int,
    rng: np.random.Generator,
    a: float = 0.0,
    x0: SimplexPoint | None = None,
) -> Trajectory:
    """One replica end to end: environment first, then generations in order."""
    atoms = sample_env_sequence(ens, n, rng)
    start = x0 or (z.direction() if not z.is_zero else SimplexPoint.barycenter(ens.p))
    walk = run_walk(start, a, (ens.mean_matrices[i] for i in atoms))
    pops = [z]
    for i in atoms:
        pops.append(step_population(pops[-1], ens.laws[i], rng))
    return Trajectory(atoms, walk, pops)


# ---------------------------------------------------------------------------
# Replica batches
# ---------------------------------------------------------------------------


@dataclass(eq=False)
class PopulationBatch:
    """``R`` populations; exact counts or log-values per replica."""

    counts: np.ndarray
    logs: np.ndarray
    exact: np.ndarray
    switched_at: np.ndarray
    step: int = 0

    @classmethod
    def start(cls, z: PopulationVector | np.ndarray, replicas: int) -> PopulationBatch:
        base = z.as_array() if isinstance(z, PopulationVector) else np.asarray(z, dtype=np.int64)
        counts = np.broadcast_to(base, (replicas, base.size)).copy()
        return cls(
            counts=counts,
            logs=np.full(counts.shape, -np.inf),
            exact=np.ones(replicas, dtype=bool),
            switched_at=np.full(replicas, NEVER, dtype=np.int64),
        )

    @property
    def size(self) -> int:
        return self.counts.shape[0]

    def log_counts(self) -> np.ndarray:
        """``ln Z(j)`` per replica and type, ``-inf`` where the count is zero."""
        with np.errstate(divide="ignore"):
            exact_logs = np.log(self.counts.astype(float))
        return np.where(self.exact[:, None], exact_logs, self.logs)

    def log_total(self) -> np.ndarray:
        """``ln |Z|`` per replica; the log of the integer total while counts are exact."""
        with np.errstate(divide="ignore"):
            exact_logs = np.log(self.counts.sum(axis=1).astype(float))
        return np.where(self.exact, exact_logs, logsumexp(self.logs, axis=1))

    def total(self) -> np.ndarray:
        """``|Z|`` per replica; integer-valued while the counts are exact."""
        with np.errstate(over="ignore"):
            tracked = np.exp(self.log_total())
        return np.where(self.exact, self.counts.sum(axis=1).astype(float), tracked)

    def alive(self) -> np.ndarray:
        return np.isfinite(self.log_counts()).any(axis=1)

    def advance(self, ens: EnvironmentEnsemble, atoms: np.ndarray, rng: np.random.Generator) -> None:
        """One generation; replica ``r`` breeds under atom ``atoms[r]``.

        Atoms are visited in increasing index and parent types in order, so
        the draws from ``rng`` follow a fixed interleaving.
        """
        new = np.zeros_like(self.counts)
        for a in np.unique(atoms):
            law = ens.laws[a]
            sel = (atoms == a) & self.exact
            if np.any(sel):
                parents = self.counts[sel]
                _guard(parents, law)
                acc = np.zeros_like(parents)
                for l, row in enumerate(law.rows):
                    acc += row.sample_sum(parents[:, l], rng)
                new[sel] = acc
            mf = (atoms == a) & ~self.exact
            if np.any(mf):
                lc = self.logs[mf]
                top = lc.max(axis=1, keepdims=True)
                safe = np.where(np.isfinite(top), top, 0.0)
                y = np.exp(lc - safe) @ ens.mean_matrices[a]
                with np.errstate(divide="ignore"):
                    self.logs[mf] = np.log(y) + safe
        self.counts = np.where(self.exact[:, None], new, 0)
        self.step += 1
        big = self.exact & (self.counts.sum(axis=1) > EXACT_LIMIT)
        if np.any(big):
            with np.errstate(divide="ignore"):
                self.logs[big] = np.log(self.counts[big].astype(float))
            self.exact[big] = False
            self.switched_at[big] = self.step
            self.counts[big] = 0
            logger.debug("%d replicas switched to log tracking at step %d", int(big.sum()), self.step)
