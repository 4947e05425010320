"""Quenched and annealed survival probabilities.

The quenched survival of a fixed environment sequence is exact: the
generating functions are polynomials, composed backward from ``t = 0``.
The annealed estimator only samples environments and averages the exact
quenched values.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Any, Sequence

import numpy as np

from bprelab.branching.population import PopulationVector
from bprelab.environment.ensemble import EnvironmentEnsemble, sample_env_block
from bprelab.errors import DomainError
from bprelab.estimates import Estimate, EstimateTable, flatness, mean_estimate
from bprelab.offspring.laws import OffspringLaw, gf_vector_eval
from bprelab.streams import ReplicaStreams, as_streams, concat_blocks
from bprelab.walk.doob import ValueFunction, weight_matrix
from bprelab.walk.path import walk_batch

logger = logging.getLogger(__name__)


def _as_population(z: PopulationVector | Sequence[int]) -> PopulationVector:
    return z if isinstance(z, PopulationVector) else PopulationVector.of(z)


def survival_from_extinction(t: np.ndarray, z: np.ndarray) -> np.ndarray:
    """``1 - prod_i t_i^{z_i}`` along the last axis."""
    return 1.0 - np.prod(np.asarray(t, dtype=float) ** np.asarray(z, dtype=float), axis=-1)


def exact_quenched_survival(
    env_seq: Sequence[OffspringLaw], z: PopulationVector | Sequence[int], n: int
) -> float:
    """``P(Z_n != 0)`` on the fixed sequence ``env_seq`` by backward composition."""
    z = _as_population(z)
    if n < 0 or len(env_seq) < n:
        raise DomainError(f"need 0 <= n <= len(env_seq), got n={n}, len={len(env_seq)}")
    if z.is_zero:
        return 0.0
    t = np.zeros(z.p)
    for k in range(n - 1, -1, -1):
        t = gf_vector_eval(env_seq[k], t)
    return float(survival_from_extinction(t, z.as_array()))


def quenched_extinction_batch(ens: EnvironmentEnsemble, atoms: np.ndarray, n: int) -> np.ndarray:
    """``f_0(f_1(...f_{n-1}(0)))`` for every replica row of ``atoms``."""
    replicas = atoms.shape[0]
    t = np.zeros((replicas, ens.p))
    for k in range(n - 1, -1, -1):
        col = atoms[:, k]
        nxt = np.empty_like(t)
        for a in np.unique(col):
            sel = col == a
            nxt[sel] = gf_vector_eval(ens.laws[a], t[sel])
        t = nxt
    return t


def annealed_survival(
    ens: EnvironmentEnsemble,
    z: PopulationVector | Sequence[int],
    n: int,
    N_env: int,
    rng: ReplicaStreams | int | None = None,
) -> Estimate:
    """Mean over sampled environments of the exact quenched survival."""
    z = _as_population(z)
    if n < 0:
        raise DomainError(f"horizon must be >= 0, got {n}")
    if n == 0:
        return Estimate(0.0 if z.is_zero else 1.0, 0.0, N_env)
    streams = as_streams(rng, "annealed-survival")
    zv = z.as_array()

    def block(g: np.random.Generator, size: int) -> np.ndarray:
        atoms = sample_env_block(ens, size, n, g)
        return survival_from_extinction(quenched_extinction_batch(ens, atoms, n), zv)

    est = mean_estimate(concat_blocks(streams.map_blocks(block, N_env)))
    logger.debug("annealed survival z=%s n=%d: %.6g +/- %.3g", z.counts, n, est.value, est.stderr)
    return est


@dataclass
class BetaTable:
    """``P(|Z_n| > 0)`` and ``sqrt(n) P(|Z_n| > 0)`` per horizon."""

    z: tuple[int, ...]
    horizons: list[int]
    survival: list[Estimate]
    scaled: list[Estimate]

    def flatness(self) -> float:
        return flatness(np.array([s.value for s in self.scaled]))

    def tables(self) -> list[EstimateTable]:
        surv = EstimateTable("survival")
        sc = EstimateTable("survival_scaled")
        for n, s, c in zip(self.horizons, self.survival, self.scaled):
            surv.add(n, s)
            sc.add(n, c)
        return [surv, sc]

    def to_dict(self) -> dict[str, Any]:
        return {
            "z": list(self.z),
            "horizons": self.horizons,
            "survival": [s.to_dict() for s in self.survival],
            "scaled": [s.to_dict() for s in self.scaled],
            "flatness": self.flatness(),
        }


def beta_z_table(
    ens: EnvironmentEnsemble,
    z: PopulationVector | Sequence[int],
    horizons: Sequence[int],
    N_env: int,
    rng: ReplicaStreams | int | None = None,
) -> BetaTable:
    """Rao-Blackwellized survival at every horizon from shared environment draws."""
    z = _as_population(z)
    hs = [int(n) for n in horizons]
    if not hs or hs[0] < 0 or any(b <= a for a, b in zip(hs, hs[1:])):
        raise DomainError(f"horizons must be non-negative and strictly increasing, got {hs}")
    streams = as_streams(rng, "beta-z")
    zv = z.as_array()

    def block(g: np.random.Generator, size: int) -> np.ndarray:
        atoms = sample_env_block(ens, size, hs[-1], g)
        cols = []
        for n in hs:
            if n == 0:
                cols.append(np.full(size, 0.0 if z.is_zero else 1.0))
            else:
                cols.append(survival_from_extinction(quenched_extinction_batch(ens, atoms, n), zv))
        return np.stack(cols, axis=1)

    values = concat_blocks(streams.map_blocks(block, N_env))
    survival, scaled = [], []
    for col, n in enumerate(hs):
        est = mean_estimate(values[:, col])
        root = np.sqrt(n)
        survival.append(est)
        scaled.append(Estimate(root * est.value, root * est.stderr, est.n))
    return BetaTable(z.counts, hs, survival, scaled)


def doob_survival_level(
    ens: EnvironmentEnsemble,
    z: PopulationVector | Sequence[int],
    a: float,
    n: int,
    N: int,
    V: ValueFunction,
    sigma: float,
    rng: ReplicaStreams | int | None = None,
) -> Estimate:
    """``2 / (sigma sqrt(2 pi)) V(x, a) E^_{x,a}[q_{n,z}]`` with ``x = z / |z|``.

    A second route to the survival constant: the quenched survival of the
    walk's own environment, averaged under the harmonic change of measure.
    """
    z = _as_population(z)
    if sigma <= 0:
        raise DomainError(f"sigma must be positive, got {sigma}")
    if n < 1:
        raise DomainError(f"horizon must be >= 1, got {n}")
    start = z.direction().coords
    root = V.check_root(start[None, :], a)
    factor = 2.0 / (sigma * np.sqrt(2.0 * np.pi)) * root
    streams = as_streams(rng, "doob-survival")
    zv = z.as_array()

    def block(g: np.random.Generator, size: int) -> np.ndarray:
        atoms = sample_env_block(ens, size, n, g)
        walks = walk_batch(ens.mean_matrices, start, a, atoms, record_states=True)
        w = weight_matrix(walks, V, root, [n])[:, 0]
        q = survival_from_extinction(quenched_extinction_batch(ens, atoms, n), zv)
        return factor * w * q

    return mean_estimate(concat_blocks(streams.map_blocks(block, N)))


def monotone_in_z(laws: Sequence[OffspringLaw], z: Sequence[int], n: int) -> bool:
    """Survival does not decrease when any ancestor is added."""
    base = exact_quenched_survival(laws, z, n)
    for i in range(len(z)):
        bigger = list(z)
        bigger[i] += 1
        if exact_quenched_survival(laws, bigger, n) < base - 1e-15:
            return False
    return True
