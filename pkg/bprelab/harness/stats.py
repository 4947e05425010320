"""Reference laws, distances and fits used by the verdicts."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Callable, Sequence

import numpy as np
from scipy import stats

from bprelab.errors import DomainError, EmptySample, NonPositiveValue


def rayleigh_cdf(t: np.ndarray | float, sigma: float) -> np.ndarray | float:
    """``R_sigma(t) = 1 - exp(-t^2 / (2 sigma^2))`` for ``t >= 0``."""
    if sigma <= 0:
        raise DomainError(f"sigma must be positive, got {sigma}")
    arr = np.asarray(t, dtype=float)
    if np.any(arr < 0) or np.any(np.isnan(arr)):
        raise DomainError("the Rayleigh CDF is defined for t >= 0")
    out = -np.expm1(-(arr**2) / (2.0 * sigma**2))
    return float(out) if out.ndim == 0 else out


def rayleigh_sigma_sensitivity(t: np.ndarray, sigma: float) -> np.ndarray:
    """``|dR_sigma(t) / dsigma| = t^2 / sigma^3 exp(-t^2 / (2 sigma^2))``."""
    t = np.asarray(t, dtype=float)
    return t**2 / sigma**3 * np.exp(-(t**2) / (2.0 * sigma**2))


@dataclass(frozen=True)
class KSResult:
    """Statistic and the sample point where the largest gap occurs."""

    statistic: float
    location: float
    n: int

    def to_dict(self) -> dict[str, Any]:
        return {"statistic": self.statistic, "location": self.location, "n": self.n}


def ks_test(samples: Sequence[float] | np.ndarray, cdf: Callable[[np.ndarray], np.ndarray]) -> KSResult:
    """One-sample KS distance with both one-sided gaps at every sorted point."""
    x = np.sort(np.asarray(samples, dtype=float).ravel())
    n = x.size
    if n == 0:
        raise EmptySample("KS distance of an empty sample")
    f = np.asarray(cdf(x), dtype=float)
    upper = np.arange(1, n + 1) / n - f
    lower = f - np.arange(n) / n
    gaps = np.maximum(upper, lower)
    i = int(np.argmax(gaps))
    return KSResult(float(max(gaps[i], 0.0)), float(x[i]), n)


def ks_distance(samples: Sequence[float] | np.ndarray, cdf: Callable[[np.ndarray], np.ndarray]) -> float:
    return ks_test(samples, cdf).statistic


def ks_two_sample(a: Sequence[float] | np.ndarray, b: Sequence[float] | np.ndarray) -> float:
    """Two-sample KS statistic."""
    a = np.asarray(a, dtype=float).ravel()
    b = np.asarray(b, dtype=float).ravel()
    if a.size == 0 or b.size == 0:
        raise EmptySample("two-sample KS needs two non-empty samples")
    return float(stats.ks_2samp(a, b).statistic)


def widened_ks_threshold(
    base: float, result: KSResult, sigma: float, sigma_stderr: float
) -> float:
    """``base + 2 |dR/dsigma| stderr(sigma)`` at the KS-maximizing point."""
    return float(base + 2.0 * rayleigh_sigma_sensitivity(result.location, sigma) * sigma_stderr)


def sigma_from_sigma2(value: float, stderr: float) -> tuple[float, float]:
    """``sqrt`` of a variance estimate with delta-method stderr."""
    if value <= 0:
        raise NonPositiveValue(f"sigma^2 estimate must be positive, got {value}")
    sigma = float(np.sqrt(value))
    return sigma, float(stderr / (2.0 * sigma))


@dataclass(frozen=True)
class InverseSqrtFit:
    """``v_n ~ c / sqrt(n)`` with the exponent fixed."""

    c: float
    residual: float

    def to_dict(self) -> dict[str, float]:
        return {"c": self.c, "residual": self.residual}


def fit_inverse_sqrt(ns: Sequence[float], values: Sequence[float]) -> InverseSqrtFit:
    """Least squares of ``ln v = ln c - ln(n) / 2``; residual is the largest relative one."""
    n = np.asarray(ns, dtype=float)
    v = np.asarray(values, dtype=float)
    if n.size < 2 or n.size != v.size:
        raise DomainError("fit_inverse_sqrt needs at least two (n, value) pairs")
    if np.any(n <= 0):
        raise DomainError("horizons must be positive")
    if np.any(v <= 0):
        raise NonPositiveValue("values must be positive for a log fit", values=v.tolist())
    log_c = float(np.mean(np.log(v) + 0.5 * np.log(n)))
    c = float(np.exp(log_c))
    fitted = c / np.sqrt(n)
    return InverseSqrtFit(c, float(np.max(np.abs(v / fitted - 1.0))))


def is_decreasing(values: Sequence[float], strict: bool = False) -> bool:
    v = np.asarray(values, dtype=float)
    d = np.diff(v)
    return bool(np.all(d < 0) if strict else np.all(d <= 0))
