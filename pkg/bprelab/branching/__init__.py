"""The branching process: populations, survival, conditioned samples and normalized populations."""

from bprelab.branching.conditioned import (
    JointBlock,
    PairedLogSample,
    ReversedProductCheck,
    branching_additivity,
    conditioned_log_population,
    conditioned_scaled_population,
    mass_near_zero,
    mean_population,
    reversed_product_check,
    scaled_rate,
    simulate_joint,
    survival_at_last_minimum,
)
from bprelab.branching.kesten_stigum import (
    KSReportVaryingEnv,
    ProductTrace,
    convergence_series,
    fixed_environment,
    kesten_stigum_diagnostics,
    trace_products,
)
from bprelab.branching.population import (
    PopulationBatch,
    PopulationVector,
    Trajectory,
    simulate_trajectory,
    step_population,
)
from bprelab.branching.survival import (
    BetaTable,
    annealed_survival,
    beta_z_table,
    doob_survival_level,
    exact_quenched_survival,
    monotone_in_z,
    quenched_extinction_batch,
)

__all__ = [
    "BetaTable",
    "JointBlock",
    "KSReportVaryingEnv",
    "PairedLogSample",
    "PopulationBatch",
    "PopulationVector",
    "ProductTrace",
    "ReversedProductCheck",
    "Trajectory",
    "annealed_survival",
    "beta_z_table",
    "branching_additivity",
    "conditioned_log_population",
    "conditioned_scaled_population",
    "convergence_series",
    "doob_survival_level",
    "exact_quenched_survival",
    "fixed_environment",
    "kesten_stigum_diagnostics",
    "mass_near_zero",
    "mean_population",
    "monotone_in_z",
    "quenched_extinction_batch",
    "reversed_product_check",
    "scaled_rate",
    "simulate_joint",
    "simulate_trajectory",
    "step_population",
    "survival_at_last_minimum",
]
