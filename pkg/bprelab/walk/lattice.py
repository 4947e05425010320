"""Exact oracle for walks whose increments are ``+h`` or ``-h``.

When every atom's mean matrix has constant row sums ``e^h`` or ``e^-h``
the walk ignores the projective state and lives on the lattice
``a + h Z``. Killed distributions, the harmonic function and the
h-transformed expectations are then computable by dynamic programming.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from bprelab.environment.ensemble import EnvironmentEnsemble
from bprelab.environment.families import constant_row_sums
from bprelab.errors import DomainError
from bprelab.walk.path import LEVEL_TOL

SYMMETRY_TOL = 1e-12


@dataclass(frozen=True)
class LatticeWalk:
    """Up-step probability ``p_up`` of size ``h``; ``eta_up``/``eta_down`` are
    the weight-summed ``eta`` of the up and down atoms."""

    h: float
    p_up: float
    eta_up: float = 0.0
    eta_down: float = 0.0

    def __post_init__(self) -> None:
        if self.h <= 0:
            raise DomainError(f"lattice step must be positive, got {self.h}")
        if not 0.0 <= self.p_up <= 1.0:
            raise DomainError(f"p_up must lie in [0, 1], got {self.p_up}")

    @property
    def symmetric(self) -> bool:
        return abs(self.p_up - 0.5) <= SYMMETRY_TOL

    @property
    def sigma2(self) -> float:
        """Variance of one increment."""
        mean = self.h * (2.0 * self.p_up - 1.0)
        return self.h**2 - mean**2

    # -- dynamic programming -------------------------------------------------

    def _alive(self, a: float, k: np.ndarray) -> np.ndarray:
        return a + k * self.h > LEVEL_TOL

    def killed_distributions(self, a: float, n_max: int) -> tuple[np.ndarray, np.ndarray]:
        """Net up-steps ``k = -n_max..n_max`` and the sub-probabilities
        ``P(S_n = a + k h, tau > n)`` for every ``n <= n_max`` (shape ``(n_max+1, 2 n_max+1)``)."""
        if a < 0:
            raise DomainError(f"walk start must be >= 0, got {a}")
        if n_max < 0:
            raise DomainError(f"n_max must be >= 0, got {n_max}")
        k = np.arange(-n_max, n_max + 1)
        alive = self._alive(a, k)
        dist = np.zeros((n_max + 1, k.size))
        dist[0, n_max] = 1.0
        q = 1.0 - self.p_up
        for n in range(1, n_max + 1):
            prev = dist[n - 1]
            cur = dist[n]
            cur[1:] += self.p_up * prev[:-1]
            cur[:-1] += q * prev[1:]
            cur[~alive] = 0.0
        return k, dist

    def killed_distribution(self, a: float, n: int) -> tuple[np.ndarray, np.ndarray]:
        """Support points ``S_n`` and their probabilities on ``{tau > n}``."""
        k, dist = self.killed_distributions(a, n)
        probs = dist[n]
        keep = probs > 0
        return a + k[keep] * self.h, probs[keep]

    def survival_curve(self, a: float, n_max: int) -> np.ndarray:
        """``P(tau > n)`` for ``n = 0..n_max``."""
        _, dist = self.killed_distributions(a, n_max)
        return dist.sum(axis=1)

    def survival(self, a: float, n: int) -> float:
        return float(self.survival_curve(a, n)[n])

    def expectation(
        self, a: float, n: int, f: Callable[[np.ndarray], np.ndarray] | None = None
    ) -> float:
        """``E[f(S_n); tau > n]``; ``f`` defaults to the identity."""
        values, probs = self.killed_distribution(a, n)
        fv = values if f is None else f(values)
        return float(np.dot(probs, fv))

    def conditional_cdf(self, a: float, n: int, t: np.ndarray | float) -> np.ndarray:
        """``P(S_n / sqrt(n) <= t | tau > n)``."""
        values, probs = self.killed_distribution(a, n)
        total = probs.sum()
        if total <= 0:
            raise DomainError("the walk cannot survive this horizon")
        t = np.atleast_1d(np.asarray(t, dtype=float))
        scaled = values / np.sqrt(n)
        return np.array([probs[scaled <= ti].sum() / total for ti in t])

    def cell(self, a: float, n: int, b: float) -> float:
        """``P(S_n in [b, b + 1), tau > n)``."""
        values, probs = self.killed_distribution(a, n)
        return float(probs[(values >= b) & (values < b + 1.0)].sum())

    # -- harmonic function and h-transform -----------------------------------

    def harmonic(self, a: np.ndarray | float) -> np.ndarray:
        """Exact ``V(a) = a - E_a[S_tau]`` of the symmetric walk.

        From ``a = 0`` the overshoot is ``-h`` or ``0`` with equal chance;
        from a positive multiple of ``h`` the walk lands on ``0``; from
        ``a = kh + r`` with ``0 < r < h`` it lands on ``r - h``.
        """
        if not self.symmetric:
            raise DomainError("the closed-form harmonic function needs p_up = 1/2")
        a = np.asarray(a, dtype=float)
        if np.any(a < -LEVEL_TOL):
            raise DomainError("V is defined for a >= 0")
        q = np.floor(a / self.h + LEVEL_TOL)
        r = a - q * self.h
        on_lattice = (r <= LEVEL_TOL) | (self.h - r <= LEVEL_TOL)
        v = np.where(on_lattice, np.round(a / self.h) * self.h, a - r + self.h)
        return np.where(a <= LEVEL_TOL, 0.5 * self.h, v)

    def doob_expectation(
        self, a: float, k: int, f: Callable[[np.ndarray], np.ndarray]
    ) -> float:
        """``E_a[f(S_k) V(S_k); tau > k] / V(a)``."""
        values, probs = self.killed_distribution(a, k)
        root = float(self.harmonic(a))
        return float(np.dot(probs, f(values) * self.harmonic(values))) / root

    def series_terms(self, a: float, n_max: int) -> tuple[np.ndarray, np.ndarray]:
        """Exact terms of the two h-transformed series for ``n = 0..n_max``.

        The first is ``E^[e^{-S_n}]``; the second weights ``e^{-S_n}`` by the
        ``eta`` of the environment drawn at step ``n``, which also moves the
        walk to ``S_{n+1}``.
        """
        k, dist = self.killed_distributions(a, n_max)
        values = a + k * self.h
        root = float(self.harmonic(a))
        v_here = self.harmonic(np.maximum(values, 0.0))
        up = values + self.h
        down = values - self.h
        v_up = np.where(up > LEVEL_TOL, self.harmonic(np.maximum(up, 0.0)), 0.0)
        v_down = np.where(down > LEVEL_TOL, self.harmonic(np.maximum(down, 0.0)), 0.0)
        # killed states carry zero mass; clipping keeps exp finite there
        decay = np.exp(-np.maximum(values, 0.0))
        e_terms = dist @ (decay * v_here) / root
        eta_terms = dist @ (decay * (self.eta_up * v_up + self.eta_down * v_down)) / root
        return e_terms, eta_terms


def lattice_walk(ens: EnvironmentEnsemble) -> LatticeWalk | None:
    """The lattice oracle for ``ens`` if its walk is a ``+-h`` walk, else None."""
    sums = constant_row_sums(ens)
    if sums is None or np.any(sums <= 0):
        return None
    steps = np.log(sums)
    live = ens.weights > 0
    h = float(np.abs(steps[live]).max())
    if h <= 0 or np.any(np.abs(np.abs(steps[live]) - h) > SYMMETRY_TOL):
        return None
    up = live & (steps > 0)
    down = live & (steps < 0)
    eta = ens.eta()
    return LatticeWalk(
        h=h,
        p_up=float(ens.weights[up].sum()),
        eta_up=float(np.dot(ens.weights[up], eta[up])),
        eta_down=float(np.dot(ens.weights[down], eta[down])),
    )
