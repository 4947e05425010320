"""Random environments: ensembles, Lyapunov exponents and hypothesis checks."""

from bprelab.environment.ensemble import (
    EnvironmentEnsemble,
    TiltKnob,
    mixture,
    sample_env_block,
    sample_env_sequence,
    single_atom,
)
from bprelab.environment.families import (
    constant_row_sums,
    drift_ensemble,
    lattice_critical_ensemble,
    scaled_geometric_ensemble,
)
from bprelab.environment.hypotheses import HypothesisReport, HypothesisStatus, validate_hypotheses
from bprelab.environment.lyapunov import (
    CalibrationResult,
    OccupationHistogram,
    calibrate_critical,
    estimate_lyapunov,
    occupation_histogram,
)

__all__ = [
    "CalibrationResult",
    "EnvironmentEnsemble",
    "HypothesisReport",
    "HypothesisStatus",
    "OccupationHistogram",
    "TiltKnob",
    "calibrate_critical",
    "constant_row_sums",
    "drift_ensemble",
    "estimate_lyapunov",
    "lattice_critical_ensemble",
    "mixture",
    "occupation_histogram",
    "sample_env_block",
    "sample_env_sequence",
    "scaled_geometric_ensemble",
    "single_atom",
    "validate_hypotheses",
]
