"""Energy- and invariant-conserving Runge-Kutta integrators built on discrete line integrals."""

from .analysis import (
    ConvergenceReport,
    DriftReport,
    convergence_report,
    cost_ratio,
    drift_report,
    drift_slope,
    estimate_orders,
    max_norm_error,
    reference_solution,
)
from .integrators import (
    ConfigError,
    MethodConfig,
    NonConvergence,
    StepWorkspace,
    Trajectory,
    elim_step,
    hbvm_step,
    integrate,
    stage_polynomial,
)
from .polybasis import (
    QuadratureRule,
    gauss_rule,
    integral_table,
    legendre_eval,
    legendre_integral,
    legendre_table,
    xi_coefficient,
)
from .problems import (
    HamiltonianProblem,
    InvariantSet,
    apply_structure,
    kepler_invariants,
    kepler_problem,
    polynomial_oscillator,
)
from .tableau import (
    SigmaScaling,
    TableauMatrices,
    build_elim_tableau,
    build_hbvm_tableau,
    tableau_to_json,
    xhat_matrix,
)

__version__ = "0.1.0"

__all__ = [
    "ConfigError",
    "ConvergenceReport",
    "DriftReport",
    "HamiltonianProblem",
    "InvariantSet",
    "MethodConfig",
    "NonConvergence",
    "QuadratureRule",
    "SigmaScaling",
    "StepWorkspace",
    "TableauMatrices",
    "Trajectory",
    "apply_structure",
    "build_elim_tableau",
    "build_hbvm_tableau",
    "convergence_report",
    "cost_ratio",
    "drift_report",
    "drift_slope",
    "elim_step",
    "estimate_orders",
    "gauss_rule",
    "hbvm_step",
    "integral_table",
    "integrate",
    "kepler_invariants",
    "kepler_problem",
    "legendre_eval",
    "legendre_integral",
    "legendre_table",
    "max_norm_error",
    "polynomial_oscillator",
    "reference_solution",
    "stage_polynomial",
    "tableau_to_json",
    "xhat_matrix",
    "xi_coefficient",
]
