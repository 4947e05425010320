"""The Markov walk ``(X_n, S_n)`` along a product of mean matrices.

``S_n = a + ln |x M_{0,n}|`` is accumulated through the cocycle
``rho(X_k, M_{k+1})``, one projective step at a time. Levels within
``LEVEL_TOL`` of zero count as non-positive so that lattice walks hitting
``0`` exactly are not lost to float rounding.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Any, Iterable

import numpy as np

from bprelab.environment.ensemble import EnvironmentEnsemble, sample_env_block
from bprelab.errors import DomainError
from bprelab.matrix.batch import act_right_batch
from bprelab.matrix.core import MatrixLike, SimplexPoint, act_right, rho

LEVEL_TOL = 1e-9
CENSORED = -1


def _first_hit(mask: np.ndarray) -> np.ndarray:
    """Index (>= 1) of the first True in each row, or CENSORED."""
    hit = mask.any(axis=-1)
    idx = np.argmax(mask, axis=-1) + 1
    return np.where(hit, idx, CENSORED)


def _last_min_index(log_norms: np.ndarray, n: int) -> np.ndarray:
    """``max{k <= n : S_k = min(S_1..S_n)}``; independent of the start level."""
    seg = log_norms[..., 1 : n + 1]
    m = seg.min(axis=-1, keepdims=True)
    ties = seg <= m + LEVEL_TOL
    return n - np.argmax(ties[..., ::-1], axis=-1)


@dataclass(frozen=True, eq=False)
class WalkPath:
    """One path of the walk with its derived stopping data.

    ``log_norms[k] = ln |x0 M_{0,k}|`` so ``S_k = a + log_norms[k]``.
    """

    x0: SimplexPoint
    a: float
    states: np.ndarray
    log_norms: np.ndarray

    @property
    def n(self) -> int:
        return self.log_norms.size - 1

    @property
    def S(self) -> np.ndarray:
        return self.a + self.log_norms

    def running_min(self, k: int | None = None) -> float:
        """``m_k = min(S_1..S_k)``; ``m_0`` is ``+inf``."""
        k = self.n if k is None else k
        if k == 0:
            return math.inf
        return float(self.S[1 : k + 1].min())

    @property
    def m_n(self) -> float:
        return self.running_min()

    @property
    def T_n(self) -> int:
        if self.n == 0:
            return 0
        return int(_last_min_index(self.log_norms, self.n))

    @property
    def tau(self) -> int | None:
        """First ``k >= 1`` with ``S_k <= 0``; None when censored at the horizon."""
        t = int(_first_hit(self.S[1:] <= LEVEL_TOL))
        return None if t == CENSORED else t

    @property
    def tau_plus(self) -> int | None:
        """First ``k >= 1`` with ``S_k >= 0``; None when censored."""
        t = int(_first_hit(self.S[1:] >= -LEVEL_TOL))
        return None if t == CENSORED else t

    def survived(self, k: int | None = None) -> bool:
        """``tau > k``, equivalently ``m_k > 0``."""
        return self.running_min(k) > LEVEL_TOL

    def to_dict(self) -> dict[str, Any]:
        return {
            "x0": self.x0.coords.tolist(),
            "a": self.a,
            "S": self.S.tolist(),
            "m_n": self.m_n,
            "T_n": self.T_n,
            "tau": self.tau,
            "tau_plus": self.tau_plus,
        }


def run_walk(x0: SimplexPoint, a: float, mats: Iterable[MatrixLike]) -> WalkPath:
    """Walk one path along the given mean matrices."""
    if a < 0:
        raise DomainError(f"walk start level must be >= 0, got {a}")
    x = x0
    states = [x.coords]
    logs = [0.0]
    for m in mats:
        inc = rho(x, m)
        x = act_right(x, m)
        states.append(x.coords)
        logs.append(logs[-1] + inc)
    return WalkPath(x0, float(a), np.array(states), np.array(logs))


# ---------------------------------------------------------------------------
# Replica batches
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class WalkBatch:
    """``R`` walk paths sharing a start, stored as arrays.

    ``log_norms`` has shape ``(R, n + 1)``; ``states`` is ``(R, n + 1, p)``
    when recorded, else only the final states ``(R, p)``.
    """

    a: float
    log_norms: np.ndarray
    states: np.ndarray
    atoms: np.ndarray
    recorded: bool

    @property
    def size(self) -> int:
        return self.log_norms.shape[0]

    @property
    def n(self) -> int:
        return self.log_norms.shape[1] - 1

    @property
    def S(self) -> np.ndarray:
        return self.a + self.log_norms

    def running_min(self) -> np.ndarray:
        """``m_k`` for every replica and ``k``; column 0 is ``+inf``."""
        out = np.empty_like(self.log_norms)
        out[:, 0] = np.inf
        if self.n:
            out[:, 1:] = np.minimum.accumulate(self.S[:, 1:], axis=1)
        return out

    def alive(self, k: int | None = None) -> np.ndarray:
        """``tau > k`` per replica."""
        k = self.n if k is None else k
        if k == 0:
            return np.ones(self.size, dtype=bool)
        return self.S[:, 1 : k + 1].min(axis=1) > LEVEL_TOL

    def alive_curve(self) -> np.ndarray:
        """``(R, n + 1)`` indicators of ``tau > k``."""
        return self.running_min() > LEVEL_TOL

    def tau(self) -> np.ndarray:
        return _first_hit(self.S[:, 1:] <= LEVEL_TOL)

    def tau_plus(self) -> np.ndarray:
        return _first_hit(self.S[:, 1:] >= -LEVEL_TOL)

    def last_min_time(self, n: int | None = None) -> np.ndarray:
        n = self.n if n is None else n
        if n == 0:
            return np.zeros(self.size, dtype=np.int64)
        return _last_min_index(self.log_norms, n)

    def path(self, r: int) -> WalkPath:
        if not self.recorded:
            raise DomainError("states were not recorded for this batch")
        x0 = SimplexPoint(self.states[r, 0])
        return WalkPath(x0, self.a, self.states[r], self.log_norms[r])


def walk_batch(
    mats: np.ndarray,
    x0: np.ndarray,
    a: float,
    atoms: np.ndarray,
    record_states: bool = False,
) -> WalkBatch:
    """Walk ``atoms.shape[0]`` replicas through ``mats[atoms[:, k]]``."""
    if a < 0:
        raise DomainError(f"walk start level must be >= 0, got {a}")
    replicas, n = atoms.shape
    p = mats.shape[1]
    x = np.broadcast_to(np.asarray(x0, dtype=float), (replicas, p)).copy()
    logs = np.zeros((replicas, n + 1))
    states = np.empty((replicas, n + 1, p)) if record_states else None
    if record_states:
        states[:, 0] = x
    for k in range(n):
        x, inc = act_right_batch(x, mats[atoms[:, k]])
        logs[:, k + 1] = logs[:, k] + inc
        if record_states:
            states[:, k + 1] = x
    return WalkBatch(float(a), logs, states if record_states else x, atoms, record_states)


def simulate_walks(
    ens: EnvironmentEnsemble,
    x0: SimplexPoint | np.ndarray,
    a: float,
    n: int,
    replicas: int,
    rng: np.random.Generator,
    record_states: bool = False,
) -> WalkBatch:
    """Draw environments for ``replicas`` paths of length ``n`` and walk them."""
    if n < 0:
        raise DomainError(f"horizon must be >= 0, got {n}")
    start = x0.coords if isinstance(x0, SimplexPoint) else np.asarray(x0, dtype=float)
    atoms = sample_env_block(ens, replicas, n, rng)
    return walk_batch(ens.mean_matrices, start, a, atoms, record_states)


def burned_in_states(
    ens: EnvironmentEnsemble, burn_in: int, replicas: int, rng: np.random.Generator
) -> np.ndarray:
    """Independent projective states after ``burn_in`` steps from the barycenter."""
    start = SimplexPoint.barycenter(ens.p).coords
    if burn_in == 0:
        return np.broadcast_to(start, (replicas, ens.p)).copy()
    batch = simulate_walks(ens, start, 0.0, burn_in, replicas, rng)
    return batch.states
