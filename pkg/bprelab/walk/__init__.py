"""The Markov walk, its estimators, the exact lattice oracle and the harmonic change of measure."""

from bprelab.walk.doob import (
    HarmonicTable,
    LatticeValue,
    SeriesTable,
    doob_expectation,
    doob_weights,
    mean_weight,
    series_partial_sums,
    train_harmonic_table,
    value_function_for,
)
from bprelab.walk.estimators import (
    LocalCell,
    TauTailTable,
    VEstimate,
    conditioned_walk_samples,
    estimate_sigma2,
    estimate_V,
    local_limit_cells,
    tau_tail_table,
)
from bprelab.walk.lattice import LatticeWalk, lattice_walk
from bprelab.walk.path import LEVEL_TOL, WalkBatch, WalkPath, run_walk, simulate_walks

__all__ = [
    "HarmonicTable",
    "LEVEL_TOL",
    "LatticeValue",
    "LatticeWalk",
    "LocalCell",
    "SeriesTable",
    "TauTailTable",
    "VEstimate",
    "WalkBatch",
    "WalkPath",
    "conditioned_walk_samples",
    "doob_expectation",
    "doob_weights",
    "estimate_V",
    "estimate_sigma2",
    "lattice_walk",
    "local_limit_cells",
    "mean_weight",
    "run_walk",
    "series_partial_sums",
    "simulate_walks",
    "tau_tail_table",
    "train_harmonic_table",
    "value_function_for",
]
