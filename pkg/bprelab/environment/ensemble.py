"""The i.i.d. random environment as a finite mixture of offspring laws."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Literal, Sequence

import numpy as np

from bprelab.errors import DomainError
from bprelab.offspring.laws import OffspringLaw
from bprelab.offspring.moments import MomentSummary, moments

WEIGHT_TOL = 1e-12


@dataclass(frozen=True)
class TiltKnob:
    """A scalar knob moving the ensemble along a one-parameter family.

    ``geometric_scale`` multiplies every truncated-geometric mean parameter
    by ``value``; ``weight_pair`` puts weight ``value`` on atom ``pair[0]``
    and ``1 - value`` on atom ``pair[1]`` (other weights fixed, the pair
    sharing their original total mass).
    """

    kind: Literal["geometric_scale", "weight_pair"]
    value: float
    lower: float
    upper: float
    pair: tuple[int, int] = (0, 1)

    def __post_init__(self) -> None:
        if not self.lower < self.upper:
            raise DomainError(f"knob bounds must satisfy lower < upper, got {self.lower}, {self.upper}")
        if self.kind == "weight_pair" and not 0.0 <= self.lower < self.upper <= 1.0:
            raise DomainError("weight_pair knob bounds must lie in [0, 1]")

    def to_dict(self) -> dict[str, Any]:
        return {
            "kind": self.kind,
            "value": self.value,
            "lower": self.lower,
            "upper": self.upper,
            "pair": list(self.pair),
        }


@dataclass(frozen=True, eq=False)
class EnvironmentEnsemble:
    """Atoms ``(weight, law)`` of the environment law, with cached moments.

    ``base_laws`` and ``base_weights`` are the untilted family; the effective
    laws and weights are obtained by applying ``knob``.
    """

    base_weights: np.ndarray
    base_laws: tuple[OffspringLaw, ...]
    knob: TiltKnob | None = None
    name: str = "ensemble"
    weights: np.ndarray = field(init=False, repr=False)
    laws: tuple[OffspringLaw, ...] = field(init=False, repr=False)
    summaries: tuple[MomentSummary, ...] = field(init=False, repr=False)
    mean_matrices: np.ndarray = field(init=False, repr=False)

    def __post_init__(self) -> None:
        w = np.array(self.base_weights, dtype=float).ravel()
        laws = tuple(self.base_laws)
        if w.size == 0 or w.size != len(laws):
            raise DomainError("an ensemble needs one weight per atom and at least one atom")
        if np.any(w < 0) or abs(float(w.sum()) - 1.0) > WEIGHT_TOL:
            raise DomainError(f"ensemble weights must be non-negative and sum to 1, got {w.tolist()}")
        w = w / w.sum()
        p = laws[0].p
        if any(law.p != p for law in laws):
            raise DomainError("all atoms of an ensemble must share the same p")
        object.__setattr__(self, "base_weights", w)
        object.__setattr__(self, "base_laws", laws)

        eff_w, eff_laws = w.copy(), laws
        if self.knob is not None:
            eff_w, eff_laws = _apply_knob(self.knob, w, laws)
        summaries = tuple(moments(law) for law in eff_laws)
        means = np.stack([s.mean_matrix for s in summaries])
        for arr in (eff_w, means):
            arr.setflags(write=False)
        object.__setattr__(self, "weights", eff_w)
        object.__setattr__(self, "laws", eff_laws)
        object.__setattr__(self, "summaries", summaries)
        object.__setattr__(self, "mean_matrices", means)

    @property
    def p(self) -> int:
        return self.base_laws[0].p

    @property
    def size(self) -> int:
        return len(self.base_laws)

    def with_knob(self, value: float) -> EnvironmentEnsemble:
        """The same family with the knob moved to ``value``."""
        if self.knob is None:
            raise DomainError("this ensemble has no tilt knob")
        knob = TiltKnob(self.knob.kind, float(value), self.knob.lower, self.knob.upper, self.knob.pair)
        return EnvironmentEnsemble(self.base_weights, self.base_laws, knob, self.name)

    def frozen(self) -> EnvironmentEnsemble:
        """The effective ensemble with the knob applied and removed."""
        return EnvironmentEnsemble(self.weights, self.laws, None, self.name)

    def eta(self) -> np.ndarray:
        """``eta`` of every atom."""
        return np.array([s.eta_g for s in self.summaries])


def _apply_knob(
    knob: TiltKnob, weights: np.ndarray, laws: tuple[OffspringLaw, ...]
) -> tuple[np.ndarray, tuple[OffspringLaw, ...]]:
    if knob.kind == "geometric_scale":
        if knob.value <= 0:
            raise DomainError(f"geometric_scale knob must be positive, got {knob.value}")
        return weights.copy(), tuple(law.scaled(knob.value) for law in laws)
    if not 0.0 <= knob.value <= 1.0:
        raise DomainError(f"weight_pair knob must lie in [0, 1], got {knob.value}")
    a, b = knob.pair
    w = weights.copy()
    mass = w[a] + w[b]
    w[a] = mass * knob.value
    w[b] = mass * (1.0 - knob.value)
    return w, laws


def single_atom(law: OffspringLaw, name: str = "single") -> EnvironmentEnsemble:
    return EnvironmentEnsemble(np.array([1.0]), (law,), name=name)


def mixture(atoms: Sequence[tuple[float, OffspringLaw]], knob: TiltKnob | None = None,
            name: str = "ensemble") -> EnvironmentEnsemble:
    return EnvironmentEnsemble(
        np.array([w for w, _ in atoms], dtype=float), tuple(l for _, l in atoms), knob, name
    )


# ---------------------------------------------------------------------------
# Sampling
# ---------------------------------------------------------------------------


def sample_env_sequence(ens: EnvironmentEnsemble, n: int, rng: np.random.Generator) -> np.ndarray:
    """``n`` i.i.d. atom indices drawn with the ensemble weights."""
    if n < 0:
        raise DomainError(f"sequence length must be >= 0, got {n}")
    return sample_env_block(ens, 1, n, rng)[0]


def sample_env_block(
    ens: EnvironmentEnsemble, replicas: int, n: int, rng: np.random.Generator
) -> np.ndarray:
    """``(replicas, n)`` array of i.i.d. atom indices."""
    if ens.size == 1:
        return np.zeros((replicas, n), dtype=np.int64)
    return rng.choice(ens.size, size=(replicas, n), p=ens.weights).astype(np.int64)
