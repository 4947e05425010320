"""Joint environment/walk/population replicas and the survival-conditioned samples.

Each replica draws its whole environment first, then breeds generation by
generation; the walk ``S_n(z / |z|, 0)`` and the normalized product
``M_{0,n}`` are driven by the same mean matrices.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Any, Sequence

import numpy as np

from bprelab.branching.population import PopulationBatch, PopulationVector
from bprelab.environment.ensemble import EnvironmentEnsemble, sample_env_block
from bprelab.errors import DegenerateMatrix, DomainError, InsufficientAcceptance
from bprelab.estimates import ConditionedSample, Estimate, mean_estimate, proportion_estimate
from bprelab.harness.stats import ks_two_sample
from bprelab.matrix.batch import act_right_batch, product_log_norms_batch
from bprelab.streams import ReplicaStreams, as_streams, concat_blocks

logger = logging.getLogger(__name__)

DEFAULT_MIN_ACCEPTED = 100
# Products over the same atoms in another order differ only by rounding.
LOG_NORM_DECIMALS = 10


@dataclass(frozen=True, eq=False)
class JointBlock:
    """End-of-horizon state of a block of joint replicas."""

    alive: np.ndarray
    log_population: np.ndarray
    total: np.ndarray
    log_counts: np.ndarray
    walk: np.ndarray
    log_columns: np.ndarray
    last_min_time: np.ndarray
    switched_at: np.ndarray


def _population(z: PopulationVector | Sequence[int]) -> PopulationVector:
    z = z if isinstance(z, PopulationVector) else PopulationVector.of(z)
    if z.is_zero:
        raise DomainError("the initial population must be nonzero")
    return z


def simulate_joint(
    ens: EnvironmentEnsemble,
    z: PopulationVector,
    n: int,
    size: int,
    rng: np.random.Generator,
    atoms: np.ndarray | None = None,
) -> JointBlock:
    """Breed ``size`` replicas for ``n`` generations alongside their walk and product.

    ``atoms`` fixes the environments; by default they are drawn from ``rng``
    before any offspring.
    """
    if atoms is None:
        atoms = sample_env_block(ens, size, n, rng)
    pops = PopulationBatch.start(z, size)
    x = np.broadcast_to(z.direction().coords, (size, ens.p)).copy()
    logs = np.zeros(size)
    running_min = np.full(size, np.inf)
    last_min = np.zeros(size, dtype=np.int64)
    unit = np.broadcast_to(np.eye(ens.p), (size, ens.p, ens.p)).copy()
    log_norm = np.zeros(size)
    mats = ens.mean_matrices
    for k in range(n):
        pops.advance(ens, atoms[:, k], rng)
        step = mats[atoms[:, k]]
        x, inc = act_right_batch(x, step)
        logs = logs + inc
        hit = logs <= running_min + 1e-9
        last_min = np.where(hit, k + 1, last_min)
        running_min = np.minimum(running_min, logs)
        unit = unit @ step
        s = unit.sum(axis=(1, 2))
        if np.any(s <= 0):
            raise DegenerateMatrix("a product vanishes", step=k)
        unit /= s[:, None, None]
        log_norm += np.log(s)
    with np.errstate(divide="ignore"):
        log_columns = log_norm[:, None] + np.log(unit.sum(axis=1))
    return JointBlock(
        alive=pops.alive(),
        log_population=pops.log_total(),
        total=pops.total(),
        log_counts=pops.log_counts(),
        walk=logs,
        log_columns=log_columns,
        last_min_time=last_min,
        switched_at=pops.switched_at.copy(),
    )


# ---------------------------------------------------------------------------
# Scaled population
# ---------------------------------------------------------------------------


def conditioned_scaled_population(
    ens: EnvironmentEnsemble,
    z: PopulationVector | Sequence[int],
    j: int,
    n: int,
    N: int,
    rng: ReplicaStreams | int | None = None,
    min_accepted: int = DEFAULT_MIN_ACCEPTED,
) -> ConditionedSample:
    """``Z_n(z, j) / |M_{0,n} e_j|`` on ``{Z_n(z, .) != 0}``.

    The ratio is formed in log space, so large populations never overflow.
    """
    z = _population(z)
    if not 0 <= j < ens.p:
        raise DomainError(f"type {j} outside 0..{ens.p - 1}")
    if n < 1:
        raise DomainError(f"horizon must be >= 1, got {n}")
    streams = as_streams(rng, f"scaled-population/{n}")

    def block(g: np.random.Generator, size: int) -> np.ndarray:
        jb = simulate_joint(ens, z, n, size, g)
        out = np.full(size, np.nan)
        out[jb.alive] = np.exp(jb.log_counts[jb.alive, j] - jb.log_columns[jb.alive, j])
        return out

    raw = concat_blocks(streams.map_blocks(block, N))
    kept = ~np.isnan(raw)
    sample = ConditionedSample(raw[kept], proportion_estimate(kept))
    logger.debug("scaled population n=%d: accepted %d of %d", n, sample.accepted, N)
    if sample.accepted < min_accepted:
        raise InsufficientAcceptance(
            f"only {sample.accepted} of {N} populations survived to n={n}",
            accepted=sample.accepted, required=min_accepted, n=n,
        )
    return sample


def mass_near_zero(sample: ConditionedSample, delta: float = 0.01) -> Estimate:
    """Empirical mass of ``[0, delta]``."""
    return proportion_estimate(sample.values <= delta)


# ---------------------------------------------------------------------------
# Log population paired with the walk
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class PairedLogSample:
    """``ln |Z_n| / sqrt(n)`` and ``S_n / sqrt(n)`` of the same surviving replicas."""

    n: int
    log_population: np.ndarray
    walk: np.ndarray
    acceptance: Estimate
    switched: int

    @property
    def accepted(self) -> int:
        return int(self.log_population.size)

    def coupling_exceedance(self, eps: float = 0.25) -> Estimate:
        """``P(|ln |Z_n| - S_n| >= eps sqrt(n) | survival)``."""
        return proportion_estimate(np.abs(self.log_population - self.walk) >= eps)

    def to_dict(self) -> dict[str, Any]:
        return {
            "n": self.n,
            "accepted": self.accepted,
            "acceptance": self.acceptance.to_dict(),
            "switched_to_log": self.switched,
        }


def conditioned_log_population(
    ens: EnvironmentEnsemble,
    z: PopulationVector | Sequence[int],
    n: int,
    N: int,
    rng: ReplicaStreams | int | None = None,
    min_accepted: int = DEFAULT_MIN_ACCEPTED,
) -> PairedLogSample:
    """Surviving replicas' ``ln |Z_n| / sqrt(n)`` with their own ``S_n / sqrt(n)``.

    The walk values alone are the walk conditioned on population survival.
    """
    z = _population(z)
    if n < 1:
        raise DomainError(f"horizon must be >= 1, got {n}")
    streams = as_streams(rng, f"log-population/{n}")
    root = np.sqrt(n)

    def block(g: np.random.Generator, size: int) -> np.ndarray:
        jb = simulate_joint(ens, z, n, size, g)
        out = np.full((size, 3), np.nan)
        alive = jb.alive
        out[alive, 0] = jb.log_population[alive] / root
        out[alive, 1] = jb.walk[alive] / root
        out[:, 2] = (jb.switched_at >= 0).astype(float)
        return out

    raw = concat_blocks(streams.map_blocks(block, N))
    kept = ~np.isnan(raw[:, 0])
    sample = PairedLogSample(
        n=n,
        log_population=raw[kept, 0],
        walk=raw[kept, 1],
        acceptance=proportion_estimate(kept),
        switched=int(raw[:, 2].sum()),
    )
    logger.debug(
        "log population n=%d: accepted %d of %d, %d switched to log tracking",
        n, sample.accepted, N, sample.switched,
    )
    if sample.accepted < min_accepted:
        raise InsufficientAcceptance(
            f"only {sample.accepted} of {N} populations survived to n={n}",
            accepted=sample.accepted, required=min_accepted, n=n,
        )
    return sample


# ---------------------------------------------------------------------------
# Structural checks
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ReversedProductCheck:
    n: int
    N: int
    statistic: float

    def to_dict(self) -> dict[str, Any]:
        return {"n": self.n, "N": self.N, "ks": self.statistic}


def reversed_product_check(
    ens: EnvironmentEnsemble, n: int, N: int, rng: ReplicaStreams | int | None = None
) -> ReversedProductCheck:
    """Two-sample KS between ``ln |M_0 ... M_{n-1}|`` and ``ln |M_{n-1} ... M_0|``
    from independent draws."""
    if n < 1 or N < 1:
        raise DomainError(f"reversed_product_check needs n >= 1 and N >= 1, got n={n}, N={N}")
    streams = as_streams(rng, "reversed-product")
    forward_streams = streams.child("forward")
    backward_streams = streams.child("backward")

    def forward(g: np.random.Generator, size: int) -> np.ndarray:
        return product_log_norms_batch(ens.mean_matrices, sample_env_block(ens, size, n, g))

    def backward(g: np.random.Generator, size: int) -> np.ndarray:
        atoms = sample_env_block(ens, size, n, g)
        return product_log_norms_batch(ens.mean_matrices, atoms[:, ::-1])

    a = np.round(concat_blocks(forward_streams.map_blocks(forward, N)), LOG_NORM_DECIMALS)
    b = np.round(concat_blocks(backward_streams.map_blocks(backward, N)), LOG_NORM_DECIMALS)
    return ReversedProductCheck(n, N, ks_two_sample(a, b))


def survival_at_last_minimum(
    ens: EnvironmentEnsemble,
    z: PopulationVector | Sequence[int],
    n: int,
    N: int,
    rng: ReplicaStreams | int | None = None,
) -> Estimate:
    """``P(|Z_n| > 0 and T_n = n)``, the event that survival coincides with a fresh walk minimum."""
    z = _population(z)
    if n < 1:
        raise DomainError(f"horizon must be >= 1, got {n}")
    streams = as_streams(rng, f"last-minimum/{n}")

    def block(g: np.random.Generator, size: int) -> np.ndarray:
        jb = simulate_joint(ens, z, n, size, g)
        return (jb.alive & (jb.last_min_time == n)).astype(float)

    return proportion_estimate(concat_blocks(streams.map_blocks(block, N)))


def scaled_rate(est: Estimate, n: int, power: float = 1.5) -> Estimate:
    """``n^power`` times an estimate."""
    f = float(n) ** power
    return Estimate(f * est.value, f * est.stderr, est.n)


def branching_additivity(
    ens: EnvironmentEnsemble,
    z: PopulationVector | Sequence[int],
    n: int,
    N: int,
    rng: ReplicaStreams | int | None = None,
) -> float:
    """Two-sample KS between ``|Z_n|`` from ``2z`` and the sum of two runs from ``z``.

    The two summed runs breed independently in one shared environment; the
    direct run draws its own.
    """
    z = _population(z)
    double = PopulationVector.of(2 * z.as_array())
    streams = as_streams(rng, "additivity")

    def block(g: np.random.Generator, size: int) -> np.ndarray:
        direct = simulate_joint(ens, double, n, size, g).total
        shared = sample_env_block(ens, size, n, g)
        first = simulate_joint(ens, z, n, size, g, shared).total
        second = simulate_joint(ens, z, n, size, g, shared).total
        return np.stack([direct, first + second], axis=1)

    pairs = concat_blocks(streams.map_blocks(block, N))
    return ks_two_sample(pairs[:, 0], pairs[:, 1])


def mean_population(
    ens: EnvironmentEnsemble,
    atoms: np.ndarray,
    z: PopulationVector | Sequence[int],
    N: int,
    rng: ReplicaStreams | int | None = None,
) -> list[Estimate]:
    """Per-type mean of ``Z_n`` over replicas sharing the fixed sequence ``atoms``."""
    z = _population(z)
    seq = np.asarray(atoms, dtype=np.int64)
    streams = as_streams(rng, "conditional-mean")

    def block(g: np.random.Generator, size: int) -> np.ndarray:
        pops = PopulationBatch.start(z, size)
        for a in seq:
            pops.advance(ens, np.full(size, a, dtype=np.int64), g)
        return np.exp(pops.log_counts())

    values = concat_blocks(streams.map_blocks(block, N))
    return [mean_estimate(values[:, j]) for j in range(ens.p)]
