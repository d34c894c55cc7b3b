"""Time-domain multiple scattering by clusters of resonant bubbles."""

from .cluster import (BubbleCluster, ConditionReport, CouplingData, GeometryError,
                      MaterialParams, check_inversion_condition,
                      check_neumann_condition, derive_coupling)
from .signal import (CausalSignal, GaussianModulated, ResonantBand, SineBurst,
                     TimeGrid, VectorSignal, forcing_vector, hrs_norm,
                     incident_field)
from .kernel import (KernelSpec, NeumannSolution, apply_K, compute_V,
                     empirical_remainder, neumann_solve, remainder_bound)

__version__ = "0.1.0"

__all__ = [
    "BubbleCluster", "CausalSignal", "ConditionReport", "CouplingData",
    "GaussianModulated", "GeometryError", "KernelSpec", "MaterialParams",
    "NeumannSolution", "ResonantBand", "SineBurst", "TimeGrid", "VectorSignal",
    "apply_K", "check_inversion_condition", "check_neumann_condition",
    "compute_V", "derive_coupling", "empirical_remainder", "forcing_vector",
    "hrs_norm", "incident_field", "neumann_solve", "remainder_bound",
]
