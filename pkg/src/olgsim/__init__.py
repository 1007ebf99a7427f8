"""Life-cycle consumption-savings and overlapping-generations solvers.

The package solves the household life-cycle problem by a forward-
backward fixed point on wealth paths (deterministic closed form and
Monte-Carlo regression schemes), evaluates natural borrowing limits
and diagnostic residuals, and closes the model in general equilibrium:
a single-cohort market-clearing rate, its sensitivity to aggregate
capital, and the overlapping-generations fixed point over demographic
flows.
"""

from .core import (
    ConfigurationError,
    DiscountSpec,
    RatePath,
    TimeGrid,
    discount_factor,
)
from .demography import (
    CustomFlow,
    DemographicFlow,
    StationaryExponential,
    StationaryUniform,
    leibniz_derivative_check,
)
from .deterministic import (
    DeterministicSolution,
    deterministic_payoff,
    solve_deterministic_crra,
)
from .ensemble import PathEnsemble
from .equilibrium import (
    CohortFamily,
    EquilibriumResult,
    RateSensitivity,
    clearing_rate_update,
    lifecycle_equilibrium_solve,
    olg_aggregates,
    olg_equilibrium_solve,
    olg_phi_map,
    rate_sensitivity_dK,
    solve_cohort_family,
    stationary_rate_bisect,
)
from .income import (
    GBM,
    CustomIncome,
    IncomeModel,
    LogNormalLaw,
    ParetoLaw,
    PointLaw,
    UniformLaw,
    derive_seed,
    path_rng,
    sample_initial,
    simulate_income,
)
from .lifecycle import (
    LifecycleSolution,
    SweepRow,
    consumption_from_terminal,
    euler_equation_residual,
    expected_wealth_sweep,
    linear_bsde_value,
    natural_borrowing_limit,
    nbl_surface,
    payoff_evaluate,
    picard_solve,
    theta_map_apply,
)
from .regression import (
    NestedMCEstimator,
    RegressionEstimator,
    polynomial_basis,
    solve_normal_equations,
)
from .utility import (
    UtilitySpec,
    inverse_marginal,
    marginal_utility,
    utility_eval,
)

__version__ = "0.1.0"

__all__ = [
    "ConfigurationError",
    "TimeGrid",
    "RatePath",
    "DiscountSpec",
    "discount_factor",
    "UtilitySpec",
    "utility_eval",
    "marginal_utility",
    "inverse_marginal",
    "GBM",
    "CustomIncome",
    "PointLaw",
    "UniformLaw",
    "LogNormalLaw",
    "ParetoLaw",
    "IncomeModel",
    "path_rng",
    "derive_seed",
    "sample_initial",
    "simulate_income",
    "PathEnsemble",
    "DeterministicSolution",
    "solve_deterministic_crra",
    "deterministic_payoff",
    "RegressionEstimator",
    "NestedMCEstimator",
    "polynomial_basis",
    "solve_normal_equations",
    "LifecycleSolution",
    "SweepRow",
    "consumption_from_terminal",
    "theta_map_apply",
    "picard_solve",
    "natural_borrowing_limit",
    "nbl_surface",
    "euler_equation_residual",
    "payoff_evaluate",
    "expected_wealth_sweep",
    "linear_bsde_value",
    "StationaryUniform",
    "StationaryExponential",
    "CustomFlow",
    "DemographicFlow",
    "leibniz_derivative_check",
    "EquilibriumResult",
    "RateSensitivity",
    "CohortFamily",
    "clearing_rate_update",
    "lifecycle_equilibrium_solve",
    "rate_sensitivity_dK",
    "solve_cohort_family",
    "olg_aggregates",
    "olg_phi_map",
    "olg_equilibrium_solve",
    "stationary_rate_bisect",
    "__version__",
]
