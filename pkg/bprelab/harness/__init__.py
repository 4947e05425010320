"""Experiment harness: statistics, files, reports and the experiment runner.

Only the statistics are re-exported here; the runner imports the whole
library and is loaded from :mod:`bprelab.harness.runner` when needed.
"""

from bprelab.harness.stats import (
    KSResult,
    fit_inverse_sqrt,
    ks_distance,
    ks_test,
    ks_two_sample,
    rayleigh_cdf,
)

__all__ = [
    "KSResult",
    "fit_inverse_sqrt",
    "ks_distance",
    "ks_test",
    "ks_two_sample",
    "rayleigh_cdf",
]
