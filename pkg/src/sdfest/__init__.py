"""Estimation of the structural distribution function of multinomial cell
probabilities: exact step-function arithmetic, natural / grouped / kernel
estimators, a Poissonization coupling, and a seeded experiment runner."""

from .core import (
    CellProbabilities,
    GroupingScheme,
    KernelSpec,
    StepCdf,
    StepDensity,
    grouped_estimator,
    grouped_parent_estimate,
    grouped_population_sdf,
    kernel_estimator,
    kernel_parent_estimate,
    kernel_population_sdf,
    l1_distance,
    make_cell_probs_from_cdf,
    natural_estimator,
    parent_density,
    poisson_mixture_expectation,
    poissonized_estimator,
    sdf_of_density,
    second_moment,
    structural_df,
    sup_distance,
)
from .parents import limit_F_eval, limit_g_eval, QuinticLimit, TabulatedCdf
from .sampling import (
    CountsPair,
    CouplingCheck,
    SeededRng,
    coupling_l1_bound,
    sample_coupled,
    sample_multinomial,
    sample_poisson,
)

__version__ = "0.1.0"

__all__ = [
    "CellProbabilities",
    "GroupingScheme",
    "KernelSpec",
    "StepCdf",
    "StepDensity",
    "grouped_estimator",
    "grouped_parent_estimate",
    "grouped_population_sdf",
    "kernel_estimator",
    "kernel_parent_estimate",
    "kernel_population_sdf",
    "l1_distance",
    "make_cell_probs_from_cdf",
    "natural_estimator",
    "parent_density",
    "poisson_mixture_expectation",
    "poissonized_estimator",
    "sdf_of_density",
    "second_moment",
    "structural_df",
    "sup_distance",
    "limit_F_eval",
    "limit_g_eval",
    "QuinticLimit",
    "TabulatedCdf",
    "CountsPair",
    "CouplingCheck",
    "SeededRng",
    "coupling_l1_bound",
    "sample_coupled",
    "sample_multinomial",
    "sample_poisson",
    "__version__",
]
