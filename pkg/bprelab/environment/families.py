"""Canonical ensemble families shipped with the lab.

The lattice family has constant-row-sum mean matrices, so the associated
walk moves by exactly ``+ln c`` or ``-ln c`` whatever the projective state;
downstream estimators can then be compared with exact lattice oracles.
"""

from __future__ import annotations

import math
from typing import Sequence

import numpy as np

from bprelab.environment.ensemble import EnvironmentEnsemble, TiltKnob
from bprelab.errors import DomainError
from bprelab.offspring.laws import (
    DEFAULT_CAP,
    PROB_TOL,
    FiniteTableRow,
    OffspringLaw,
    ZeroInflatedGeometricRow,
)

CANONICAL_BASE = np.array([[0.5, 0.5], [0.25, 0.75]])
CANONICAL_C = 2.0
CANONICAL_EPS = 1.0 / 16.0


def table_row_for_means(means: Sequence[float], eps: float) -> FiniteTableRow:
    """A finite-table row with the given means that lies in G(eps, K).

    Atoms: ``h * ones`` with probability ``eps``, ``h * e_j`` with probability
    ``m_j / h - eps`` and the zero row with the remainder, where ``h >= 2``
    is the smallest integer leaving the zero row at least ``eps``.
    """
    m = np.asarray(means, dtype=float)
    p = m.size
    if not 0.0 < eps < 1.0 / (p + 1):
        raise DomainError(f"eps must lie in (0, 1/(p+1)), got {eps}")
    total = float(m.sum())
    slack = 1.0 + (p - 2) * eps
    h = max(2, math.ceil(total / slack - 1e-12))
    if np.any(m < h * eps - PROB_TOL):
        raise DomainError(
            f"every mean must be >= h * eps = {h * eps} for a two-child atom to fit", means=m.tolist()
        )
    support = [np.full(p, h, dtype=np.int64)]
    probs = [eps]
    for j in range(p):
        q = m[j] / h - eps
        if q > PROB_TOL:
            atom = np.zeros(p, dtype=np.int64)
            atom[j] = h
            support.append(atom)
            probs.append(q)
    zero = 1.0 - sum(probs)
    if zero > PROB_TOL:
        support.append(np.zeros(p, dtype=np.int64))
        probs.append(zero)
    return FiniteTableRow(np.stack(support), np.array(probs))


def table_law_for_means(mean_matrix: np.ndarray, eps: float) -> OffspringLaw:
    return OffspringLaw(tuple(table_row_for_means(row, eps) for row in np.asarray(mean_matrix)))


def _check_base(base: np.ndarray) -> np.ndarray:
    base = np.asarray(base, dtype=float)
    if base.ndim != 2 or base.shape[0] != base.shape[1]:
        raise DomainError("base must be a square matrix")
    if np.any(base <= 0) or not np.allclose(base.sum(axis=1), 1.0, atol=1e-12):
        raise DomainError("base must be positive and row-stochastic")
    return base


def lattice_critical_ensemble(
    base: np.ndarray = CANONICAL_BASE,
    c: float = CANONICAL_C,
    eps: float = CANONICAL_EPS,
    name: str = "lattice-critical",
) -> EnvironmentEnsemble:
    """Mean matrices ``c * base`` and ``base / c`` with weight 1/2 each.

    Critical by symmetry; the walk increments are exactly ``+-ln c``.
    """
    base = _check_base(base)
    if c <= 1.0:
        raise DomainError(f"c must exceed 1, got {c}")
    up = table_law_for_means(c * base, eps)
    down = table_law_for_means(base / c, eps)
    return EnvironmentEnsemble(np.array([0.5, 0.5]), (up, down), name=name)


def drift_ensemble(
    base: np.ndarray = CANONICAL_BASE,
    r: float = 2.0,
    eps: float = CANONICAL_EPS,
    name: str | None = None,
) -> EnvironmentEnsemble:
    """Single atom with mean matrix ``r * base``: supercritical for ``r > 1``, subcritical below."""
    base = _check_base(base)
    law = table_law_for_means(r * base, eps)
    return EnvironmentEnsemble(np.array([1.0]), (law,), name=name or f"drift-{r:g}")


def scaled_geometric_ensemble(
    means: Sequence[np.ndarray],
    q0: float | Sequence[float],
    weights: Sequence[float] | None = None,
    scale: float = 1.0,
    bounds: tuple[float, float] = (0.25, 4.0),
    cap: int = DEFAULT_CAP,
    name: str = "scaled-geometric",
) -> EnvironmentEnsemble:
    """Zero-inflated geometric atoms sharing a global scale knob.

    ``means[a][i, j]`` is the pre-truncation mean parameter of atom ``a``;
    the knob multiplies all of them.
    """
    mats = [np.asarray(m, dtype=float) for m in means]
    if not mats:
        raise DomainError("at least one atom is required")
    p = mats[0].shape[0]
    q = np.broadcast_to(np.asarray(q0, dtype=float), (p,))
    laws = tuple(
        OffspringLaw(tuple(ZeroInflatedGeometricRow(float(q[i]), m[i], cap) for i in range(p)))
        for m in mats
    )
    w = np.full(len(laws), 1.0 / len(laws)) if weights is None else np.asarray(weights, dtype=float)
    knob = TiltKnob("geometric_scale", float(scale), bounds[0], bounds[1])
    return EnvironmentEnsemble(w, laws, knob, name)


def constant_row_sums(ens: EnvironmentEnsemble, tol: float = 1e-12) -> np.ndarray | None:
    """Per-atom row sum when every atom's mean matrix has constant row sums, else None."""
    sums = ens.mean_matrices.sum(axis=2)
    if np.any(np.abs(sums - sums[:, :1]) > tol * np.maximum(1.0, np.abs(sums[:, :1]))):
        return None
    return sums[:, 0].copy()
