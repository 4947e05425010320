"""The harmonic change of measure and its Monte Carlo use.

Under the transformed measure a path prefix of length ``k`` is reweighted
by ``w_k = V(X_k, S_k) 1{m_k > 0} / V(x, a)``. ``V`` comes from a fixed,
pre-trained value function: the exact lattice formula when the ensemble
is a lattice family, otherwise a Monte Carlo :class:`HarmonicTable`.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Any, Callable, Protocol, Sequence

import numpy as np

from bprelab.environment.ensemble import EnvironmentEnsemble
from bprelab.errors import DomainError, RootValueNonpositive
from bprelab.estimates import (
    Estimate,
    EstimateTable,
    column_moments,
    combine_moments,
)
from bprelab.matrix.core import SimplexPoint
from bprelab.streams import ReplicaStreams, as_streams
from bprelab.walk.estimators import estimate_V
from bprelab.walk.lattice import LatticeWalk, lattice_walk
from bprelab.walk.path import LEVEL_TOL, WalkBatch, WalkPath, simulate_walks

logger = logging.getLogger(__name__)

Functional = Callable[[np.ndarray, np.ndarray], np.ndarray]


class ValueFunction(Protocol):
    def __call__(self, x: np.ndarray, a: np.ndarray) -> np.ndarray: ...

    def check_root(self, x: np.ndarray, a: float) -> float: ...


@dataclass(frozen=True)
class LatticeValue:
    """Exact harmonic function of a symmetric lattice walk."""

    walk: LatticeWalk

    def __call__(self, x: np.ndarray, a: np.ndarray) -> np.ndarray:
        return self.walk.harmonic(np.maximum(np.asarray(a, dtype=float), 0.0))

    def check_root(self, x: np.ndarray, a: float) -> float:
        return float(self.walk.harmonic(max(a, 0.0)))


@dataclass(frozen=True, eq=False)
class HarmonicTable:
    """Monte Carlo ``V`` on an ``a``-grid per bin of the first coordinate of ``x``.

    Linear in ``a`` between grid points, unit slope beyond the last one,
    constant below the first.
    """

    a_grid: np.ndarray
    edges: np.ndarray
    values: np.ndarray
    stderrs: np.ndarray
    horizon: int = 0
    replicas: int = 0

    def _bins(self, x: np.ndarray) -> np.ndarray:
        first = np.atleast_2d(np.asarray(x, dtype=float))[:, 0]
        return np.clip(np.searchsorted(self.edges, first, side="right") - 1, 0, len(self.edges) - 2)

    def _interp(self, table: np.ndarray, bins: np.ndarray, a: np.ndarray, slope: float) -> np.ndarray:
        out = np.empty(a.shape)
        top = self.a_grid[-1]
        for b in np.unique(bins):
            sel = bins == b
            ab = a[sel]
            inside = np.interp(ab, self.a_grid, table[b])
            out[sel] = np.where(ab > top, table[b, -1] + slope * (ab - top), inside)
        return out

    def __call__(self, x: np.ndarray, a: np.ndarray) -> np.ndarray:
        a = np.atleast_1d(np.asarray(a, dtype=float))
        bins = np.broadcast_to(self._bins(x), a.shape)
        return self._interp(self.values, bins, a, 1.0)

    def stderr(self, x: np.ndarray, a: np.ndarray) -> np.ndarray:
        a = np.atleast_1d(np.asarray(a, dtype=float))
        bins = np.broadcast_to(self._bins(x), a.shape)
        return self._interp(self.stderrs, bins, a, 0.0)

    def check_root(self, x: np.ndarray, a: float) -> float:
        value = float(self(x, np.array([a]))[0])
        err = float(self.stderr(x, np.array([a]))[0])
        if value <= 3.0 * err:
            raise RootValueNonpositive(
                "V is not significantly positive at the root", a=a, value=value, stderr=err
            )
        return value

    def to_dict(self) -> dict[str, Any]:
        return {
            "a_grid": self.a_grid.tolist(),
            "edges": self.edges.tolist(),
            "values": self.values.tolist(),
            "stderrs": self.stderrs.tolist(),
            "horizon": self.horizon,
            "replicas": self.replicas,
        }


def _bin_center(edges: np.ndarray, b: int, p: int) -> SimplexPoint:
    first = 0.5 * (edges[b] + edges[b + 1])
    rest = np.full(p - 1, (1.0 - first) / (p - 1))
    return SimplexPoint(np.concatenate([[first], rest]))


def train_harmonic_table(
    ens: EnvironmentEnsemble,
    a_grid: Sequence[float],
    n: int,
    N: int,
    rng: ReplicaStreams | int | None = None,
    bins: int = 4,
) -> HarmonicTable:
    """Estimate ``V`` at the center of every bin and every grid level."""
    grid = np.asarray(sorted(float(a) for a in a_grid))
    if grid.size < 2 or grid[0] < 0:
        raise DomainError("the a-grid needs at least two levels, all >= 0")
    streams = as_streams(rng, "harmonic-table")
    edges = np.linspace(0.0, 1.0, bins + 1)
    values = np.empty((bins, grid.size))
    stderrs = np.empty((bins, grid.size))
    for b in range(bins):
        x = _bin_center(edges, b, ens.p)
        for i, a in enumerate(grid):
            est = estimate_V(ens, x, a, n, N, streams.child(f"bin{b}/a{i}"))
            if not est.stabilized:
                logger.warning("V table entry bin=%d a=%g did not stabilize", b, a)
            values[b, i] = est.value
            stderrs[b, i] = est.stderr
    return HarmonicTable(grid, edges, values, stderrs, n, N)


def value_function_for(
    ens: EnvironmentEnsemble,
    rng: ReplicaStreams | int | None = None,
    a_grid: Sequence[float] = (0.0, 1.0, 2.0, 4.0, 8.0),
    n: int = 256,
    N: int = 4096,
) -> ValueFunction:
    """The exact lattice ``V`` when available, otherwise a trained table."""
    walk = lattice_walk(ens)
    if walk is not None and walk.symmetric:
        return LatticeValue(walk)
    return train_harmonic_table(ens, a_grid, n, N, rng)


# ---------------------------------------------------------------------------
# Weights and weighted expectations
# ---------------------------------------------------------------------------


def doob_weights(path: WalkPath, V: ValueFunction, k: int) -> float:
    """``w_k`` of one path; ``w_0 = 1``."""
    if not 0 <= k <= path.n:
        raise DomainError(f"k must lie in 0..{path.n}, got {k}")
    root = _root(V, path.x0.coords, path.a)
    if k == 0:
        return 1.0
    if not path.survived(k):
        return 0.0
    value = float(V(path.states[k][None, :], np.array([path.S[k]]))[0])
    return value / root


def weight_matrix(batch: WalkBatch, V: ValueFunction, root: float, ks: Sequence[int]) -> np.ndarray:
    """``w_k`` for every replica of a recorded batch and every ``k`` in ``ks``."""
    if not batch.recorded:
        raise DomainError("Doob weights need recorded states")
    alive = batch.alive_curve()
    S = batch.S
    out = np.zeros((batch.size, len(ks)))
    for col, k in enumerate(ks):
        if k == 0:
            out[:, col] = 1.0
            continue
        live = alive[:, k]
        if np.any(live):
            out[live, col] = V(batch.states[live, k], S[live, k]) / root
    return out


def _root(V: ValueFunction, x: np.ndarray, a: float) -> float:
    root = V.check_root(x[None, :], a)
    if root <= 0:
        raise RootValueNonpositive("V vanishes at the root", a=a, value=root)
    return root


def _start(ens: EnvironmentEnsemble, x: SimplexPoint | None) -> np.ndarray:
    return (x or SimplexPoint.barycenter(ens.p)).coords


def doob_expectation(
    ens: EnvironmentEnsemble,
    x: SimplexPoint | None,
    a: float,
    phi: Functional,
    k: int,
    N: int,
    V: ValueFunction,
    rng: ReplicaStreams | int | None = None,
) -> Estimate:
    """Importance-weighted mean of ``phi(S_0..S_k, X_0..X_k)``.

    ``phi`` receives ``S`` of shape ``(R, k + 1)`` and ``X`` of shape
    ``(R, k + 1, p)`` and returns one value per replica.
    """
    if k < 0:
        raise DomainError(f"k must be >= 0, got {k}")
    start = _start(ens, x)
    root = _root(V, start, a)
    streams = as_streams(rng, f"doob/{k}")

    def block(g: np.random.Generator, size: int):
        walks = simulate_walks(ens, start, a, k, size, g, record_states=True)
        w = weight_matrix(walks, V, root, [k])[:, 0]
        return column_moments((np.asarray(phi(walks.S, walks.states), dtype=float) * w)[:, None])

    est = combine_moments(streams.map_blocks(block, N))[0]
    logger.debug("doob expectation k=%d: %.6g +/- %.3g", k, est.value, est.stderr)
    return est


def mean_weight(
    ens: EnvironmentEnsemble,
    x: SimplexPoint | None,
    a: float,
    k: int,
    N: int,
    V: ValueFunction,
    rng: ReplicaStreams | int | None = None,
) -> Estimate:
    """``E[w_k]``; equal to one when ``V`` is harmonic."""
    return doob_expectation(ens, x, a, lambda S, X: np.ones(S.shape[0]), k, N, V, rng)


# ---------------------------------------------------------------------------
# Series under the transformed measure
# ---------------------------------------------------------------------------


@dataclass
class SeriesTable:
    """Terms and partial sums of ``E^[e^{-S_n}]`` and ``E^[eta_n e^{-S_n}]``."""

    a: float
    terms: list[Estimate]
    eta_terms: list[Estimate]
    partial: list[Estimate]
    eta_partial: list[Estimate]

    @property
    def n_max(self) -> int:
        return len(self.terms) - 1

    def increments(self, ns: Sequence[int], eta: bool = False) -> np.ndarray:
        """Partial-sum growth from ``n`` to ``2n`` for each ``n``."""
        sums = np.array([e.value for e in (self.eta_partial if eta else self.partial)])
        return np.array([sums[2 * n] - sums[n] for n in ns])

    def tables(self) -> list[EstimateTable]:
        out = []
        for name, seq in (
            ("series_terms", self.terms),
            ("series_eta_terms", self.eta_terms),
            ("series_partial", self.partial),
            ("series_eta_partial", self.eta_partial),
        ):
            t = EstimateTable(name)
            for n, e in enumerate(seq):
                t.add(n, e)
            out.append(t)
        return out

    def to_dict(self) -> dict[str, Any]:
        return {
            "a": self.a,
            "n_max": self.n_max,
            "partial": self.partial[-1].to_dict(),
            "eta_partial": self.eta_partial[-1].to_dict(),
        }


def series_partial_sums(
    ens: EnvironmentEnsemble,
    x: SimplexPoint | None,
    a: float,
    n_max: int,
    N: int,
    V: ValueFunction,
    rng: ReplicaStreams | int | None = None,
) -> SeriesTable:
    """Per-term and cumulative estimates for ``n = 0..n_max``.

    ``eta_n`` belongs to the environment drawn at step ``n``, which also
    moves the walk to ``S_{n+1}``, so that term is weighted by ``w_{n+1}``.
    """
    if n_max < 0:
        raise DomainError(f"n_max must be >= 0, got {n_max}")
    start = _start(ens, x)
    root = _root(V, start, a)
    eta = ens.eta()
    streams = as_streams(rng, "series")
    ks = list(range(n_max + 2))

    def block(g: np.random.Generator, size: int):
        walks = simulate_walks(ens, start, a, n_max + 1, size, g, record_states=True)
        w = weight_matrix(walks, V, root, ks)
        alive = walks.alive_curve()
        # dead paths carry zero weight; clipping keeps exp finite there
        decay = np.exp(-np.where(alive, walks.S, 0.0))[:, : n_max + 1]
        e = decay * w[:, : n_max + 1]
        h = decay * eta[walks.atoms[:, : n_max + 1]] * w[:, 1 : n_max + 2]
        return column_moments(np.concatenate([e, h, np.cumsum(e, axis=1), np.cumsum(h, axis=1)], axis=1))

    ests = combine_moments(streams.map_blocks(block, N))
    m = n_max + 1
    table = SeriesTable(float(a), ests[:m], ests[m : 2 * m], ests[2 * m : 3 * m], ests[3 * m :])
    logger.debug(
        "series a=%g n_max=%d: sum=%.6g eta-sum=%.6g",
        a, n_max, table.partial[-1].value, table.eta_partial[-1].value,
    )
    return table


def positive_at_end(S: np.ndarray, X: np.ndarray) -> np.ndarray:
    """Functional ``1{S_k > 0}``."""
    return (S[:, -1] > LEVEL_TOL).astype(float)
