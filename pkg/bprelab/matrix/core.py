"""Non-negative matrices, the simplex, projective actions and normalized products.

Row vectors act on the right (``x . M = xM / |xM|``), column vectors act on
the left (``M . x = Mx / |Mx|``). All norms are L1.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from bprelab.errors import DegenerateMatrix, DomainError

SIMPLEX_TOL = 1e-12


# ---------------------------------------------------------------------------
# Value types
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class PosMatrix:
    """A square matrix with finite non-negative entries."""

    entries: np.ndarray = field(repr=False)

    def __post_init__(self) -> None:
        a = np.array(self.entries, dtype=float)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise DomainError(f"PosMatrix must be square, got shape {a.shape}")
        if not np.all(np.isfinite(a)):
            raise DomainError("PosMatrix entries must be finite")
        if np.any(a < 0):
            raise DomainError("PosMatrix entries must be non-negative")
        a.setflags(write=False)
        object.__setattr__(self, "entries", a)

    @property
    def p(self) -> int:
        return self.entries.shape[0]

    @classmethod
    def identity(cls, p: int) -> PosMatrix:
        return cls(np.eye(p))

    def __matmul__(self, other: PosMatrix) -> PosMatrix:
        return PosMatrix(self.entries @ other.entries)

    def __repr__(self) -> str:
        return f"PosMatrix({self.entries.tolist()!r})"


@dataclass(frozen=True, eq=False)
class SimplexPoint:
    """A point of the simplex: non-negative coordinates summing to one.

    Construction renormalizes any input with a positive sum.
    """

    coords: np.ndarray = field(repr=False)

    def __post_init__(self) -> None:
        c = np.array(self.coords, dtype=float).ravel()
        if c.size == 0 or not np.all(np.isfinite(c)):
            raise DomainError("SimplexPoint needs finite coordinates")
        if np.any(c < 0):
            raise DomainError("SimplexPoint coordinates must be non-negative")
        total = float(c.sum())
        if total < SIMPLEX_TOL:
            raise DomainError(f"SimplexPoint needs a positive coordinate sum, got {total}")
        c = c / total
        c.setflags(write=False)
        object.__setattr__(self, "coords", c)

    @property
    def p(self) -> int:
        return self.coords.size

    @classmethod
    def basis(cls, p: int, i: int) -> SimplexPoint:
        e = np.zeros(p)
        e[i] = 1.0
        return cls(e)

    @classmethod
    def barycenter(cls, p: int) -> SimplexPoint:
        return cls(np.ones(p))

    def __repr__(self) -> str:
        return f"SimplexPoint({self.coords.tolist()!r})"


@dataclass(frozen=True, eq=False)
class NormalizedProduct:
    """Overflow-safe representation of ``M_{0,n} = M_0 ... M_{n-1}``.

    ``M_{0,n} = exp(log_norm) * unit`` where ``unit`` has L1 norm one for
    ``n >= 1`` (and is the identity for the empty chain). ``bar_matrix`` is
    ``unit`` with every column rescaled to sum to one.
    """

    bar_matrix: PosMatrix
    log_norm: float
    length: int
    unit: np.ndarray = field(repr=False)

    def matrix(self) -> np.ndarray:
        """Reconstruct the raw product; only sensible for short chains."""
        return np.exp(self.log_norm) * self.unit

    def column_log_norms(self) -> np.ndarray:
        """``ln |M_{0,n} e_j|`` for every column ``j``."""
        with np.errstate(divide="ignore"):
            return self.log_norm + np.log(self.unit.sum(axis=0))


MatrixLike = PosMatrix | np.ndarray | Sequence[Sequence[float]]


def _arr(m: MatrixLike) -> np.ndarray:
    if isinstance(m, PosMatrix):
        return m.entries
    return PosMatrix(m).entries


def _vec(x: SimplexPoint | np.ndarray | Sequence[float]) -> np.ndarray:
    if isinstance(x, SimplexPoint):
        return x.coords
    return SimplexPoint(x).coords


# ---------------------------------------------------------------------------
# Norms and the class S+(B)
# ---------------------------------------------------------------------------


def l1_norm(m: MatrixLike) -> float:
    """Sum of all entries."""
    return float(np.sum(np.abs(_arr(m))))


def min_col_sum(m: MatrixLike) -> float:
    """``v(M)``: the smallest column sum."""
    return float(np.min(_arr(m).sum(axis=0)))


def cond_bound(m: MatrixLike) -> float:
    """``max(1 / v(M), |M|)``."""
    v = min_col_sum(m)
    if v <= 0:
        raise DegenerateMatrix("cond_bound needs every column sum positive", v=v)
    return max(1.0 / v, l1_norm(m))


def in_class_B(m: MatrixLike, B: float) -> bool:
    """True iff all entries are positive and max/min entry <= B."""
    if B < 1:
        raise DomainError(f"B must be >= 1, got {B}")
    a = _arr(m)
    lo = float(a.min())
    if lo <= 0:
        return False
    return float(a.max()) / lo <= B


# ---------------------------------------------------------------------------
# Projective actions and the cocycle
# ---------------------------------------------------------------------------


def act_right(x: SimplexPoint, m: MatrixLike) -> SimplexPoint:
    """``x . M = xM / |xM|``."""
    y = _vec(x) @ _arr(m)
    if y.sum() <= 0:
        raise DegenerateMatrix("xM vanishes")
    return SimplexPoint(y)


def act_left(m: MatrixLike, x: SimplexPoint) -> SimplexPoint:
    """``M . x = Mx / |Mx|`` for a column vector ``x``."""
    y = _arr(m) @ _vec(x)
    if y.sum() <= 0:
        raise DegenerateMatrix("Mx vanishes")
    return SimplexPoint(y)


def rho(x: SimplexPoint, m: MatrixLike) -> float:
    """The cocycle ``ln |xM|``."""
    s = float((_vec(x) @ _arr(m)).sum())
    if s <= 0:
        raise DegenerateMatrix("xM vanishes")
    return float(np.log(s))


# ---------------------------------------------------------------------------
# Contraction metric
# ---------------------------------------------------------------------------


def _m_ratio(x: np.ndarray, y: np.ndarray) -> float:
    support = y > 0
    return float(np.min(x[support] / y[support]))


def hennion_distance(x: SimplexPoint, y: SimplexPoint) -> float:
    """Bounded projective distance ``(1 - m(x,y)m(y,x)) / (1 + m(x,y)m(y,x))``.

    ``m(x, y) = min{x_i / y_i : y_i > 0}``.
    """
    xv, yv = _vec(x), _vec(y)
    prod = _m_ratio(xv, yv) * _m_ratio(yv, xv)
    return max(0.0, (1.0 - prod) / (1.0 + prod))


def contraction_coeff(m: MatrixLike) -> float:
    """``[M]``: max distance between images of basis vectors under the left action.

    The supremum over all pairs of the simplex is attained on basis pairs;
    the invariant suite checks this against random pairs.
    """
    a = _arr(m)
    cols = a.sum(axis=0)
    if np.any(cols <= 0):
        raise DegenerateMatrix("contraction_coeff needs every column nonzero")
    images = [SimplexPoint(a[:, j]) for j in range(a.shape[1])]
    best = 0.0
    for i in range(len(images)):
        for j in range(i + 1, len(images)):
            best = max(best, hennion_distance(images[i], images[j]))
    return best


# ---------------------------------------------------------------------------
# Products
# ---------------------------------------------------------------------------


def _bar(unit: np.ndarray) -> PosMatrix:
    cols = unit.sum(axis=0)
    if np.any(cols <= 0):
        raise DegenerateMatrix("a column of the product vanishes")
    return PosMatrix(unit / cols)


def product_chain(ms: Iterable[MatrixLike], p: int | None = None) -> NormalizedProduct:
    """Normalized right product ``M_0 M_1 ... M_{n-1}``.

    The log-norm is accumulated step by step, so long critical chains never
    overflow. ``p`` is only needed for an empty chain.
    """
    unit: np.ndarray | None = None
    log_norm = 0.0
    length = 0
    for m in ms:
        a = _arr(m)
        nxt = a.copy() if unit is None else unit @ a
        s = float(nxt.sum())
        if s <= 0 or np.any(nxt.sum(axis=0) <= 0):
            raise DegenerateMatrix("a column of the product vanishes", step=length)
        unit = nxt / s
        log_norm += float(np.log(s))
        length += 1
    if unit is None:
        if p is None:
            raise DomainError("product_chain of an empty chain needs p")
        unit = np.eye(p)
    return NormalizedProduct(bar_matrix=_bar(unit), log_norm=log_norm, length=length, unit=unit)


def extend_product(prod: NormalizedProduct, m: MatrixLike) -> NormalizedProduct:
    """Right-multiply an existing normalized product by one more matrix."""
    nxt = prod.unit @ _arr(m)
    s = float(nxt.sum())
    if s <= 0 or np.any(nxt.sum(axis=0) <= 0):
        raise DegenerateMatrix("a column of the product vanishes", step=prod.length)
    unit = nxt / s
    return NormalizedProduct(
        bar_matrix=_bar(unit),
        log_norm=prod.log_norm + float(np.log(s)),
        length=prod.length + 1,
        unit=unit,
    )


def rank_one_direction(prod: NormalizedProduct) -> SimplexPoint:
    """First column of the normalized product: the current rank-one direction estimate."""
    if prod.length < 1:
        raise DomainError("rank_one_direction needs a product of length >= 1")
    return SimplexPoint(prod.bar_matrix.entries[:, 0])


def column_spread(prod: NormalizedProduct) -> float:
    """Largest distance between two normalized columns of the product."""
    bar = prod.bar_matrix.entries
    cols = [SimplexPoint(bar[:, j]) for j in range(bar.shape[1])]
    return max(
        (hennion_distance(cols[i], cols[j]) for i in range(len(cols)) for j in range(i + 1, len(cols))),
        default=0.0,
    )


def random_class_b_matrix(rng: np.random.Generator, p: int, B: float) -> PosMatrix:
    """Random matrix of S+(B): entries uniform on ``[1, B]``."""
    return PosMatrix(rng.uniform(1.0, B, size=(p, p)))


def random_simplex_point(rng: np.random.Generator, p: int) -> SimplexPoint:
    """Uniform point of the simplex (flat Dirichlet)."""
    return SimplexPoint(rng.dirichlet(np.ones(p)))
