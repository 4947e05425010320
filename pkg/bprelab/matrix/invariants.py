"""Randomized invariant suite for the matrix layer.

Each check draws its own cases from a generator and returns a
:class:`CheckResult` with the worst attained value, so the harness can
report the suite next to the hypothesis checks.
"""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass
from typing import Any

import numpy as np

from bprelab.matrix.core import (
    PosMatrix,
    SimplexPoint,
    act_left,
    act_right,
    contraction_coeff,
    hennion_distance,
    l1_norm,
    min_col_sum,
    product_chain,
    random_class_b_matrix,
    random_simplex_point,
    rho,
)

logger = logging.getLogger(__name__)


@dataclass
class CheckResult:
    name: str
    passed: bool
    worst: float
    threshold: float
    cases: int

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)


def _random_pos(rng: np.random.Generator, p: int) -> PosMatrix:
    return PosMatrix(rng.uniform(0.1, 10.0, size=(p, p)))


def check_cocycle(rng: np.random.Generator, cases: int = 1000, tol: float = 1e-10) -> CheckResult:
    """``rho(x, MN) = rho(x . M, N) + rho(x, M)``."""
    worst = 0.0
    for _ in range(cases):
        p = int(rng.integers(2, 5))
        x = random_simplex_point(rng, p)
        m, n = _random_pos(rng, p), _random_pos(rng, p)
        gap = abs(rho(x, m @ n) - rho(act_right(x, m), n) - rho(x, m))
        worst = max(worst, gap)
    return CheckResult("cocycle", worst <= tol, worst, tol, cases)


def check_norm_sandwich(rng: np.random.Generator, cases: int = 1000, tol: float = 1e-12) -> CheckResult:
    """``v(M)|x| <= |Mx| <= |M||x|`` for column vectors ``x >= 0`` (relative slack)."""
    worst = 0.0
    for _ in range(cases):
        p = int(rng.integers(2, 5))
        m = _random_pos(rng, p)
        x = rng.uniform(0.0, 5.0, size=p)
        mx = float((m.entries @ x).sum())
        lower = min_col_sum(m) * x.sum()
        upper = l1_norm(m) * x.sum()
        worst = max(worst, (lower - mx) / max(mx, 1e-300), (mx - upper) / max(upper, 1e-300))
    return CheckResult("norm_sandwich", worst <= tol, worst, tol, cases)


def check_distance_clauses(
    rng: np.random.Generator, cases: int = 1000, B: float = 5.0, tol: float = 1e-12
) -> CheckResult:
    """Bounds, L1 domination, contraction and sub-multiplicativity of ``[.]``."""
    worst = 0.0
    for _ in range(cases):
        p = int(rng.integers(2, 5))
        x, y = random_simplex_point(rng, p), random_simplex_point(rng, p)
        m, n = random_class_b_matrix(rng, p, B), random_class_b_matrix(rng, p, B)
        d = hennion_distance(x, y)
        worst = max(worst, -d, d - 1.0)
        worst = max(worst, float(np.abs(x.coords - y.coords).sum()) - 2.0 * d)
        worst = max(worst, hennion_distance(act_left(m, x), act_left(m, y)) - contraction_coeff(m) * d)
        worst = max(worst, contraction_coeff(m @ n) - contraction_coeff(m) * contraction_coeff(n))
    return CheckResult("distance_clauses", worst <= tol, worst, tol, cases)


def contraction_level(rng: np.random.Generator, B: float, cases: int = 1000) -> float:
    """Empirical maximum of ``[M]`` over random ``M`` in S+(B)."""
    level = 0.0
    for _ in range(cases):
        p = int(rng.integers(2, 5))
        level = max(level, contraction_coeff(random_class_b_matrix(rng, p, B)))
    return level


def check_basis_pairs(
    rng: np.random.Generator, cases: int = 200, pairs: int = 10_000, tol: float = 1e-9
) -> CheckResult:
    """The supremum defining ``[M]`` is attained on basis pairs."""
    worst = -np.inf
    for _ in range(cases):
        p = int(rng.integers(2, 5))
        m = _random_pos(rng, p).entries
        coeff = contraction_coeff(m)
        xs = rng.dirichlet(np.ones(p), size=pairs)
        ys = rng.dirichlet(np.ones(p), size=pairs)
        mx = xs @ m.T
        my = ys @ m.T
        mx /= mx.sum(axis=1, keepdims=True)
        my /= my.sum(axis=1, keepdims=True)
        # m(x, y) is over y > 0; images of interior points are interior.
        a = np.min(mx / my, axis=1)
        b = np.min(my / mx, axis=1)
        d = (1.0 - a * b) / (1.0 + a * b)
        worst = max(worst, float(d.max()) - coeff)
    return CheckResult("basis_pairs", worst <= tol, float(worst), tol, cases)


def comparison_constant(rng: np.random.Generator, B: float, cases: int = 1000, length: int = 8) -> dict[str, float]:
    """Fit the comparison constant for products of S+(B) matrices.

    Returns the worst entry ratio of the products (bounded by ``B**2``) and
    the fitted ``c`` with ``|y M x| >= |M| / c`` and ``|MN| >= |M||N| / c``.
    """
    ratio = 0.0
    c = 1.0
    for _ in range(cases):
        p = int(rng.integers(2, 5))
        ms = [random_class_b_matrix(rng, p, B) for _ in range(length)]
        left = product_chain(ms[: length // 2]).unit
        right = product_chain(ms[length // 2 :]).unit
        full = left @ right
        ratio = max(ratio, float(full.max() / full.min()))
        x = rng.dirichlet(np.ones(p))
        y = rng.dirichlet(np.ones(p))
        c = max(c, float(full.sum() / (y @ full @ x)))
        c = max(c, float(left.sum() * right.sum() / full.sum()))
    return {"entry_ratio": ratio, "c": c}


def run_suite(rng: np.random.Generator, cases: int = 1000) -> list[CheckResult]:
    """Run every matrix invariant with ``cases`` randomized cases each."""
    results = [
        check_cocycle(rng, cases),
        check_norm_sandwich(rng, cases),
        check_distance_clauses(rng, cases),
        check_basis_pairs(rng, max(cases // 5, 1), pairs=2000),
    ]
    for r in results:
        logger.debug("matrix invariant %s: worst=%.3g passed=%s", r.name, r.worst, r.passed)
    return results
