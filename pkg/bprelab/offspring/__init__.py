"""Offspring laws: sampling, exact generating functions, moments and class checks."""

from bprelab.offspring.laws import (
    FiniteTableRow,
    OffspringLaw,
    ZeroInflatedGeometricRow,
    deterministic_law,
    geometric_law,
    gf_eval,
    gf_vector_eval,
    sample_offspring,
    table_law,
    truncated_geometric_pmf,
)
from bprelab.offspring.moments import (
    ClassReport,
    ConditionCheck,
    MomentSummary,
    moments,
    validate_class,
)
