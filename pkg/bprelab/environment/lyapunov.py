"""Lyapunov exponent estimation, criticality calibration and the occupation surrogate."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from bprelab.environment.ensemble import EnvironmentEnsemble, sample_env_block
from bprelab.errors import CalibrationFailed, DegenerateMatrix, DomainError
from bprelab.estimates import Estimate, mean_estimate
from bprelab.matrix.batch import act_right_batch
from bprelab.matrix.core import SimplexPoint
from bprelab.streams import ReplicaStreams, as_streams, concat_blocks

logger = logging.getLogger(__name__)


def walk_log_norms(
    ens: EnvironmentEnsemble, x0: np.ndarray, n: int, replicas: int, rng: np.random.Generator
) -> np.ndarray:
    """``ln |x0 M_{0,n}|`` for ``replicas`` independent environment sequences."""
    atoms = sample_env_block(ens, replicas, n, rng)
    x = np.broadcast_to(np.asarray(x0, dtype=float), (replicas, ens.p)).copy()
    total = np.zeros(replicas)
    for k in range(n):
        x, inc = act_right_batch(x, ens.mean_matrices[atoms[:, k]])
        total += inc
    return total


def estimate_lyapunov(
    ens: EnvironmentEnsemble,
    n: int,
    N: int,
    rng: ReplicaStreams | int | None = None,
    x0: SimplexPoint | None = None,
) -> Estimate:
    """Replica mean of ``ln |x M_{0,n}| / n`` with its standard error.

    The log-norm is accumulated through the cocycle, started from the
    barycenter unless ``x0`` is given. For constant row sums ``r`` every
    replica returns ``ln r`` exactly.
    """
    if n < 1 or N < 2:
        raise DomainError(f"estimate_lyapunov needs n >= 1 and N >= 2, got n={n}, N={N}")
    streams = as_streams(rng, "lyapunov")
    start = (x0 or SimplexPoint.barycenter(ens.p)).coords
    parts = streams.map_blocks(lambda g, size: walk_log_norms(ens, start, n, size, g) / n, N)
    est = mean_estimate(concat_blocks(parts))
    logger.debug("lyapunov %s: n=%d N=%d pi=%.6g +/- %.3g", ens.name, n, N, est.value, est.stderr)
    return est


# ---------------------------------------------------------------------------
# Calibration
# ---------------------------------------------------------------------------


@dataclass
class CalibrationStep:
    knob: float
    pi: float
    stderr: float

    def to_dict(self) -> dict[str, float]:
        return {"knob": self.knob, "pi": self.pi, "stderr": self.stderr}


@dataclass
class CalibrationResult:
    """Calibrated ensemble plus the bracketing history and budget."""

    ensemble: EnvironmentEnsemble
    knob: float | None
    estimate: Estimate
    history: list[CalibrationStep] = field(default_factory=list)
    budget: dict[str, int] = field(default_factory=dict)

    def to_dict(self) -> dict[str, Any]:
        return {
            "knob": self.knob,
            "pi": self.estimate.to_dict(),
            "history": [h.to_dict() for h in self.history],
            "budget": self.budget,
        }


def calibrate_critical(
    ens: EnvironmentEnsemble,
    target_tol: float,
    rng: ReplicaStreams | int | None = None,
    n: int = 200,
    N: int = 2000,
    max_iter: int = 60,
) -> CalibrationResult:
    """Bisection on the ensemble's tilt knob until ``|pi_hat| <= target_tol``.

    Every evaluation reuses the same streams, so the estimated exponent is
    a smooth monotone function of the knob.
    """
    streams = as_streams(rng, "calibrate")
    budget = {"n": n, "N": N}
    history: list[CalibrationStep] = []

    def evaluate(candidate: EnvironmentEnsemble) -> Estimate:
        est = estimate_lyapunov(candidate, n, N, streams)
        knob = candidate.knob.value if candidate.knob else float("nan")
        history.append(CalibrationStep(knob, est.value, est.stderr))
        logger.info("calibration knob=%.6g pi=%.6g +/- %.3g", knob, est.value, est.stderr)
        return est

    current = evaluate(ens)
    if abs(current.value) <= target_tol:
        return CalibrationResult(ens, ens.knob.value if ens.knob else None, current, history, budget)
    if ens.knob is None:
        raise CalibrationFailed(
            "ensemble is not critical and has no tilt knob", pi=current.value
        )

    lo, hi = ens.knob.lower, ens.knob.upper
    f_lo = evaluate(ens.with_knob(lo)).value
    f_hi = evaluate(ens.with_knob(hi)).value
    if np.sign(f_lo) == np.sign(f_hi):
        raise CalibrationFailed(
            "no sign change of the Lyapunov exponent within the knob bounds",
            lower=lo, upper=hi, pi_lower=f_lo, pi_upper=f_hi,
        )
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        candidate = ens.with_knob(mid)
        est = evaluate(candidate)
        if abs(est.value) <= target_tol:
            return CalibrationResult(candidate, mid, est, history, budget)
        if np.sign(est.value) == np.sign(f_lo):
            lo, f_lo = mid, est.value
        else:
            hi, f_hi = mid, est.value
    raise CalibrationFailed(
        "bisection did not reach the target tolerance", iterations=max_iter, lower=lo, upper=hi
    )


# ---------------------------------------------------------------------------
# Occupation histogram
# ---------------------------------------------------------------------------


@dataclass
class OccupationHistogram:
    """Normalized bin masses of the projective chain on the simplex.

    For ``p = 2`` bins are on the first coordinate; for ``p = 3`` on the
    first two coordinates (cells outside the simplex stay empty).
    """

    edges: np.ndarray
    mass: np.ndarray
    steps: int

    def total_variation(self, other: OccupationHistogram) -> float:
        return 0.5 * float(np.abs(self.mass - other.mass).sum())

    def to_dict(self) -> dict[str, Any]:
        return {"edges": self.edges.tolist(), "mass": self.mass.tolist(), "steps": self.steps}


def occupation_histogram(
    ens: EnvironmentEnsemble,
    x0: SimplexPoint,
    burn_in: int,
    n: int,
    rng: np.random.Generator,
    bins: int = 50,
    chunk: int = 65_536,
) -> OccupationHistogram:
    """Histogram of ``X_k`` for ``burn_in < k <= n`` along one chain."""
    if ens.p not in (2, 3):
        raise DomainError(f"occupation histogram supports p = 2 or 3, got {ens.p}")
    if n < burn_in:
        raise DomainError(f"n must be >= burn_in, got n={n}, burn_in={burn_in}")
    edges = np.linspace(0.0, 1.0, bins + 1)
    shape = (bins,) if ens.p == 2 else (bins, bins)
    counts = np.zeros(shape)
    x = x0.coords.copy()
    mats = ens.mean_matrices
    k = 0
    while k < n:
        steps = min(chunk, n - k)
        atoms = sample_env_block(ens, 1, steps, rng)[0]
        trail = np.empty((steps, ens.p))
        for t in range(steps):
            y = x @ mats[atoms[t]]
            norm = y.sum()
            if norm <= 0:
                raise DegenerateMatrix("projective step hit the zero vector", step=k + t + 1, atom=int(atoms[t]))
            x = y / norm
            trail[t] = x
        keep = trail[max(burn_in - k, 0):]
        if len(keep):
            if ens.p == 2:
                counts += np.histogram(keep[:, 0], bins=edges)[0]
            else:
                counts += np.histogram2d(keep[:, 0], keep[:, 1], bins=(edges, edges))[0]
        k += steps
    total = counts.sum()
    mass = counts / total if total > 0 else counts
    return OccupationHistogram(edges, mass, n - burn_in)
