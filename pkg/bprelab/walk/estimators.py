"""Monte Carlo estimators built on the Markov walk."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np

from bprelab.environment.ensemble import EnvironmentEnsemble
from bprelab.errors import DomainError, InsufficientAcceptance
from bprelab.estimates import (
    ConditionedSample,
    Estimate,
    EstimateTable,
    flatness,
    mean_estimate,
    proportion_estimate,
)
from bprelab.matrix.core import SimplexPoint
from bprelab.streams import ReplicaStreams, as_streams, concat_blocks
from bprelab.walk.path import burned_in_states, simulate_walks

logger = logging.getLogger(__name__)

DEFAULT_MIN_ACCEPTED = 100
DEFAULT_BURN_IN = 64
STABILIZATION_TOL = 0.05


def _start(ens: EnvironmentEnsemble, x: SimplexPoint | None) -> np.ndarray:
    if x is None:
        return SimplexPoint.barycenter(ens.p).coords
    if x.p != ens.p:
        raise DomainError(f"start point has dimension {x.p}, ensemble has p={ens.p}")
    return x.coords


def _check_horizons(horizons: Sequence[int]) -> list[int]:
    hs = [int(n) for n in horizons]
    if not hs or any(n < 0 for n in hs) or any(b <= a for a, b in zip(hs, hs[1:])):
        raise DomainError(f"horizons must be non-negative and strictly increasing, got {hs}")
    return hs


# ---------------------------------------------------------------------------
# Variance
# ---------------------------------------------------------------------------


def estimate_sigma2(
    ens: EnvironmentEnsemble,
    n: int,
    N: int,
    rng: ReplicaStreams | int | None = None,
    burn_in: int = DEFAULT_BURN_IN,
) -> Estimate:
    """Mean of ``S_n(x, 0)^2 / n`` with ``x`` taken from a burned-in chain."""
    if n < 1 or N < 2:
        raise DomainError(f"estimate_sigma2 needs n >= 1 and N >= 2, got n={n}, N={N}")
    streams = as_streams(rng, "sigma2")

    def block(g: np.random.Generator, size: int) -> np.ndarray:
        x = burned_in_states(ens, burn_in, size, g)
        walks = simulate_walks(ens, x, 0.0, n, size, g)
        return walks.log_norms[:, n] ** 2 / n

    est = mean_estimate(concat_blocks(streams.map_blocks(block, N)))
    logger.debug("sigma2 %s: n=%d N=%d -> %.6g +/- %.3g", ens.name, n, N, est.value, est.stderr)
    return est


# ---------------------------------------------------------------------------
# Tail of tau
# ---------------------------------------------------------------------------


@dataclass
class TauTailTable:
    """``P(tau > n)`` and ``sqrt(n) P(tau > n)`` at every horizon."""

    a: float
    horizons: list[int]
    survival: list[Estimate]
    scaled: list[Estimate]

    def flatness(self) -> float:
        return flatness(np.array([s.value for s in self.scaled]))

    def tables(self) -> list[EstimateTable]:
        surv = EstimateTable("tau_tail")
        sc = EstimateTable("tau_tail_scaled")
        for n, s, c in zip(self.horizons, self.survival, self.scaled):
            surv.add(n, s)
            sc.add(n, c)
        return [surv, sc]

    def to_dict(self) -> dict[str, Any]:
        return {
            "a": self.a,
            "horizons": self.horizons,
            "survival": [s.to_dict() for s in self.survival],
            "scaled": [s.to_dict() for s in self.scaled],
            "flatness": self.flatness(),
        }


def tau_tail_table(
    ens: EnvironmentEnsemble,
    x: SimplexPoint | None,
    a: float,
    horizons: Sequence[int],
    N: int,
    rng: ReplicaStreams | int | None = None,
) -> TauTailTable:
    """Shared-path estimator: one path per replica read at every horizon."""
    hs = _check_horizons(horizons)
    streams = as_streams(rng, "tau-tail")
    start = _start(ens, x)

    def block(g: np.random.Generator, size: int) -> np.ndarray:
        walks = simulate_walks(ens, start, a, hs[-1], size, g)
        curve = walks.alive_curve()
        return curve[:, hs].astype(float)

    hits = concat_blocks(streams.map_blocks(block, N))
    survival, scaled = [], []
    for col, n in enumerate(hs):
        est = proportion_estimate(hits[:, col])
        root = np.sqrt(n)
        survival.append(est)
        scaled.append(Estimate(root * est.value, root * est.stderr, est.n))
    return TauTailTable(float(a), hs, survival, scaled)


# ---------------------------------------------------------------------------
# Harmonic function at finite horizon
# ---------------------------------------------------------------------------


@dataclass
class VEstimate:
    """``E[S_n; tau > n]`` with the stabilization curve at ``n/4, n/2, n``."""

    x: SimplexPoint
    a: float
    n: int
    N: int
    value: float
    stderr: float
    curve: dict[int, Estimate] = field(default_factory=dict)

    @property
    def estimate(self) -> Estimate:
        return Estimate(self.value, self.stderr, self.N)

    @property
    def stabilization_ratio(self) -> float:
        return flatness(np.array([e.value for e in self.curve.values()]))

    @property
    def stabilized(self) -> bool:
        return self.stabilization_ratio <= 1.0 + STABILIZATION_TOL

    @property
    def significant(self) -> bool:
        """``V > 3 stderr``: the root is usable for Doob weights."""
        return self.value > 3.0 * self.stderr

    def to_dict(self) -> dict[str, Any]:
        return {
            "x": self.x.coords.tolist(),
            "a": self.a,
            "n": self.n,
            "N": self.N,
            "value": self.value,
            "stderr": self.stderr,
            "curve": {str(k): v.to_dict() for k, v in self.curve.items()},
            "stabilized": self.stabilized,
        }


def estimate_V(
    ens: EnvironmentEnsemble,
    x: SimplexPoint | None,
    a: float,
    n: int,
    N: int,
    rng: ReplicaStreams | int | None = None,
) -> VEstimate:
    """Empirical ``E[S_n; tau > n]`` plus its values at ``n/4`` and ``n/2``."""
    if a < 0:
        raise DomainError(f"V is defined for a >= 0, got {a}")
    if n < 1 or N < 2:
        raise DomainError(f"estimate_V needs n >= 1 and N >= 2, got n={n}, N={N}")
    streams = as_streams(rng, "harmonic")
    start = _start(ens, x)
    subs = sorted({max(n // 4, 1), max(n // 2, 1), n})

    def block(g: np.random.Generator, size: int) -> np.ndarray:
        walks = simulate_walks(ens, start, a, n, size, g)
        curve = walks.alive_curve()
        S = walks.S
        return np.stack([S[:, k] * curve[:, k] for k in subs], axis=1)

    samples = concat_blocks(streams.map_blocks(block, N))
    curve = {k: mean_estimate(samples[:, i]) for i, k in enumerate(subs)}
    final = curve[n]
    est = VEstimate(SimplexPoint(start), float(a), n, N, final.value, final.stderr, curve)
    logger.debug(
        "V(%s, a=%g) n=%d: %.6g +/- %.3g (stabilization %.4f)",
        ens.name, a, n, est.value, est.stderr, est.stabilization_ratio,
    )
    return est


# ---------------------------------------------------------------------------
# Conditioned samples and local cells
# ---------------------------------------------------------------------------


def conditioned_walk_samples(
    ens: EnvironmentEnsemble,
    x: SimplexPoint | None,
    a: float,
    n: int,
    N: int,
    rng: ReplicaStreams | int | None = None,
    min_accepted: int = DEFAULT_MIN_ACCEPTED,
) -> ConditionedSample:
    """``S_n / sqrt(n)`` on ``{tau > n}`` by plain rejection."""
    if n < 1:
        raise DomainError(f"conditioned_walk_samples needs n >= 1, got {n}")
    streams = as_streams(rng, "conditioned-walk")
    start = _start(ens, x)

    def block(g: np.random.Generator, size: int) -> np.ndarray:
        walks = simulate_walks(ens, start, a, n, size, g)
        kept = walks.alive(n)
        out = np.full(size, np.nan)
        out[kept] = walks.S[kept, n] / np.sqrt(n)
        return out

    raw = concat_blocks(streams.map_blocks(block, N))
    kept = ~np.isnan(raw)
    sample = ConditionedSample(raw[kept], proportion_estimate(kept))
    logger.debug(
        "conditioned walk %s n=%d: accepted %d of %d", ens.name, n, sample.accepted, N
    )
    if sample.accepted < min_accepted:
        raise InsufficientAcceptance(
            f"only {sample.accepted} of {N} walks survived to n={n}",
            accepted=sample.accepted, required=min_accepted, n=n,
        )
    return sample


@dataclass
class LocalCell:
    b: float
    n: int
    probability: Estimate

    @property
    def scaled(self) -> Estimate:
        """``n^{3/2} P(S_n in [b, b+1), tau > n)``."""
        f = self.n**1.5
        return Estimate(f * self.probability.value, f * self.probability.stderr, self.probability.n)

    def to_dict(self) -> dict[str, Any]:
        return {"b": self.b, "n": self.n, "probability": self.probability.to_dict()}


def local_limit_cells(
    ens: EnvironmentEnsemble,
    x: SimplexPoint | None,
    a: float,
    b_list: Sequence[float],
    n: int,
    N: int,
    rng: ReplicaStreams | int | None = None,
) -> list[LocalCell]:
    """``P(S_n in [b, b+1), tau > n)`` for every ``b`` from shared paths."""
    bs = [float(b) for b in b_list]
    if any(b < 0 for b in bs):
        raise DomainError(f"cell levels must be >= 0, got {bs}")
    if n < 1:
        raise DomainError(f"local_limit_cells needs n >= 1, got {n}")
    streams = as_streams(rng, f"local-limit/{n}")
    start = _start(ens, x)
    lows = np.array(bs)

    def block(g: np.random.Generator, size: int) -> np.ndarray:
        walks = simulate_walks(ens, start, a, n, size, g)
        s = walks.S[:, n][:, None]
        alive = walks.alive(n)[:, None]
        return (alive & (s >= lows) & (s < lows + 1.0)).astype(float)

    hits = concat_blocks(streams.map_blocks(block, N))
    return [LocalCell(b, n, proportion_estimate(hits[:, i])) for i, b in enumerate(bs)]
