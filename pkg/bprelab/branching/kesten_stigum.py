"""Normalized populations on one fixed environment sequence.

The sequence ``g_0, g_1, ...`` is drawn once and then held fixed; only the
offspring are resampled. ``W_n(z, j) = Z_n(z, j) / |M_{0,n}(., j)|`` is
compared across horizons, and its vanishing is compared with extinction
computed exactly from the generating functions of the same sequence.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np

from bprelab.branching.population import PopulationBatch, PopulationVector
from bprelab.branching.survival import exact_quenched_survival
from bprelab.environment.ensemble import EnvironmentEnsemble, sample_env_sequence
from bprelab.errors import DegenerateMatrix, DomainError
from bprelab.estimates import Estimate, EstimateTable, mean_estimate, proportion_estimate
from bprelab.offspring.moments import moments
from bprelab.streams import ReplicaStreams, as_streams, concat_blocks

logger = logging.getLogger(__name__)

DEFAULT_W_THRESHOLD = 0.01


def fixed_environment(ens: EnvironmentEnsemble, length: int, seed: int) -> np.ndarray:
    """Atom indices of one environment sequence, reproducible from ``seed`` alone."""
    if length < 1:
        raise DomainError(f"sequence length must be >= 1, got {length}")
    g = as_streams(seed, "fixed-environment").generator(0)
    return np.asarray(sample_env_sequence(ens, length, g), dtype=np.int64)


@dataclass
class ProductTrace:
    """``M_{0,n}`` for ``n = 0..length`` as a normalized matrix and a log scale."""

    units: np.ndarray
    log_scale: np.ndarray

    @property
    def length(self) -> int:
        return self.units.shape[0] - 1

    def log_columns(self, n: int) -> np.ndarray:
        """``ln |M_{0,n}(., j)|`` per column ``j``."""
        with np.errstate(divide="ignore"):
            return self.log_scale[n] + np.log(self.units[n].sum(axis=0))

    def log_norm(self, n: int) -> float:
        return float(self.log_scale[n] + np.log(self.units[n].sum()))

    def entries(self, n: int) -> np.ndarray:
        return self.units[n] * np.exp(self.log_scale[n])


def trace_products(ens: EnvironmentEnsemble, atoms: Sequence[int]) -> ProductTrace:
    p = ens.p
    units = [np.eye(p)]
    scale = [0.0]
    unit = np.eye(p)
    for k, a in enumerate(atoms):
        unit = unit @ ens.mean_matrices[a]
        s = float(unit.sum())
        if s <= 0:
            raise DegenerateMatrix("the product of the fixed sequence vanishes", step=k)
        unit = unit / s
        units.append(unit)
        scale.append(scale[-1] + np.log(s))
    return ProductTrace(np.stack(units), np.asarray(scale))


def convergence_series(
    ens: EnvironmentEnsemble, atoms: Sequence[int], trace: ProductTrace, n_max: int
) -> tuple[np.ndarray, np.ndarray]:
    """Partial sums up to ``n_max`` of both convergence series, entrywise in ``(i, j)``.

    The variance series adds ``sigma2_{g_n}(i, j) / (|M_{0,n}| |M_{g_{n+1}}|^2)``
    from ``n = 0``; the mean series adds ``1 / M_{0,n}(i, j)`` from ``n = 1``
    because ``M_{0,0}`` is the identity.
    """
    if trace.length < n_max + 1 or len(atoms) < n_max + 2:
        raise DomainError(f"the sequence is too short for series up to n={n_max}")
    p = ens.p
    summaries = {a: moments(ens.laws[a]) for a in np.unique(np.asarray(atoms[: n_max + 2]))}
    var_sum = np.zeros((p, p))
    mean_sum = np.zeros((p, p))
    variance, mean = [], []
    for n in range(n_max + 1):
        sigma2 = summaries[atoms[n]].sigma2
        nxt = summaries[atoms[n + 1]].norm
        var_sum = var_sum + sigma2 * np.exp(-trace.log_norm(n)) / nxt**2
        if n >= 1:
            with np.errstate(divide="ignore"):
                mean_sum = mean_sum + 1.0 / trace.entries(n)
        variance.append(var_sum.copy())
        mean.append(mean_sum.copy())
    return np.stack(variance), np.stack(mean)


@dataclass
class KSReportVaryingEnv:
    """Normalized-population diagnostics for one fixed environment sequence."""

    env_seed: int | None
    env_atoms: list[int]
    z: tuple[int, ...]
    horizons: list[int]
    w_mean: list[list[Estimate]]
    w_var: list[list[float]]
    cauchy: list[Estimate]
    variance_series: np.ndarray
    mean_series: np.ndarray
    w_threshold: float
    coincidence: Estimate | None
    exact_extinction: float
    mc_extinction: Estimate
    nonnegative: bool
    notes: list[str] = field(default_factory=list)

    def tables(self) -> list[EstimateTable]:
        out = []
        for j in range(len(self.z)):
            t = EstimateTable(f"w_mean_{j}")
            for n, row in zip(self.horizons, self.w_mean):
                t.add(n, row[j])
            out.append(t)
        cauchy = EstimateTable("l2_cauchy")
        for n, est in zip(self.horizons, self.cauchy):
            cauchy.add(n, est)
        out.append(cauchy)
        for name, series in (("variance_series", self.variance_series), ("mean_series", self.mean_series)):
            t = EstimateTable(name)
            for n in range(series.shape[0]):
                t.add(n, Estimate(float(np.max(series[n])), 0.0, 0))
            out.append(t)
        return out

    def cauchy_decreasing(self) -> bool:
        v = [c.value for c in self.cauchy]
        return all(b < a for a, b in zip(v, v[1:]))

    def to_dict(self) -> dict[str, Any]:
        return {
            "env_seed": self.env_seed,
            "env_atoms": self.env_atoms,
            "z": list(self.z),
            "horizons": self.horizons,
            "w_mean": [[e.to_dict() for e in row] for row in self.w_mean],
            "w_var": self.w_var,
            "l2_cauchy": [c.to_dict() for c in self.cauchy],
            "variance_series_final": self.variance_series[-1].tolist(),
            "mean_series_final": self.mean_series[-1].tolist(),
            "w_threshold": self.w_threshold,
            "coincidence": self.coincidence.to_dict() if self.coincidence else None,
            "exact_extinction": self.exact_extinction,
            "mc_extinction": self.mc_extinction.to_dict(),
            "nonnegative": self.nonnegative,
            "notes": self.notes,
        }


def kesten_stigum_diagnostics(
    ens: EnvironmentEnsemble,
    env_atoms: Sequence[int],
    z: PopulationVector | Sequence[int],
    horizons: Sequence[int],
    N: int,
    rng: ReplicaStreams | int | None = None,
    env_seed: int | None = None,
    w_threshold: float = DEFAULT_W_THRESHOLD,
) -> KSReportVaryingEnv:
    """Means, variances and ``E[(W_{2n} - W_n)^2]`` of ``W_n`` on ``env_atoms``.

    ``env_atoms`` must cover ``2 max(horizons) + 1`` generations. The
    coincidence frequency is ``P(extinct at H | max_j W_H < w_threshold)``
    at the largest horizon ``H``.
    """
    z = z if isinstance(z, PopulationVector) else PopulationVector.of(z)
    if z.is_zero:
        raise DomainError("the initial population must be nonzero")
    hs = [int(n) for n in horizons]
    if not hs or hs[0] < 1 or any(b <= a for a, b in zip(hs, hs[1:])):
        raise DomainError(f"horizons must be positive and strictly increasing, got {hs}")
    seq = np.asarray(env_atoms, dtype=np.int64)
    top = hs[-1]
    if seq.size < 2 * top + 1:
        raise DomainError(f"need at least {2 * top + 1} environment atoms, got {seq.size}")
    if N < 1:
        raise DomainError(f"N must be >= 1, got {N}")

    trace = trace_products(ens, seq[: 2 * top + 1])
    times = sorted(set(hs) | {2 * n for n in hs})
    log_cols = {t: trace.log_columns(t) for t in times}
    streams = as_streams(rng, "kesten-stigum")
    p = ens.p

    def block(g: np.random.Generator, size: int) -> np.ndarray:
        pops = PopulationBatch.start(z, size)
        cols = []
        for k in range(2 * top):
            pops.advance(ens, np.full(size, seq[k], dtype=np.int64), g)
            if k + 1 in log_cols:
                cols.append(np.exp(pops.log_counts() - log_cols[k + 1]))
        return np.concatenate(cols, axis=1)

    W = concat_blocks(streams.map_blocks(block, N))
    at = {t: W[:, i * p : (i + 1) * p] for i, t in enumerate(times)}

    w_mean, w_var, cauchy = [], [], []
    for n in hs:
        w = at[n]
        w_mean.append([mean_estimate(w[:, j]) for j in range(p)])
        w_var.append([float(np.var(w[:, j], ddof=1)) if N > 1 else 0.0 for j in range(p)])
        cauchy.append(mean_estimate(((at[2 * n] - w) ** 2).sum(axis=1)))

    final = at[top]
    extinct = ~(final > 0).any(axis=1)
    small = final.max(axis=1) < w_threshold
    coincidence = proportion_estimate(extinct[small]) if small.any() else None
    laws = [ens.laws[a] for a in seq[:top]]
    exact = 1.0 - exact_quenched_survival(laws, z, top)
    mc = proportion_estimate(extinct)
    variance_series, mean_series = convergence_series(ens, seq, trace, 2 * top - 1)

    notes = []
    if not mc.within(exact, k=4.0):
        notes.append(f"extinction at n={top}: simulated {mc.value:.6g} vs exact {exact:.6g}")
        logger.warning("Simulated extinction %.6g differs from the exact %.6g", mc.value, exact)
    if coincidence is None:
        notes.append(f"no replica had max_j W < {w_threshold} at n={top}")
    logger.info(
        "Normalized populations: E[(W_2n - W_n)^2] = %s",
        ", ".join(f"{c.value:.3g}" for c in cauchy),
    )
    return KSReportVaryingEnv(
        env_seed=env_seed,
        env_atoms=seq.tolist(),
        z=z.counts,
        horizons=hs,
        w_mean=w_mean,
        w_var=w_var,
        cauchy=cauchy,
        variance_series=variance_series,
        mean_series=mean_series,
        w_threshold=w_threshold,
        coincidence=coincidence,
        exact_extinction=exact,
        mc_extinction=mc,
        nonnegative=bool(np.all(W >= 0)),
        notes=notes,
    )
