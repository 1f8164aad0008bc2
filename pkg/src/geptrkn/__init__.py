"""GEPTRKN collocation methods.

Explicit pseudo two-step Runge-Kutta-Nystrom integrators for
``y'' = f(t, y, y')`` built from collocation nodes, with variable step
sizes, embedded error control, dense output and linear stability analysis.
"""

from .collocation import (NODE_SETS, PAIRS, CollocationScheme, OrthogonalityReport,
                          coefficient_residuals, dense_output_weights, derive_coefficients,
                          derive_variable_coefficients, embedded_scheme, expand_node_polynomial,
                          get_scheme, orthogonality_residuals, resolve_method,
                          variable_coefficients_direct)
from .estimator import GEPTRKNIntegrator
from .exceptions import *  # noqa: F401,F403
from .experiments import (ExperimentConfig, inspect_scheme, run_convergence_table,
                          run_stability_export, run_work_precision)
from .integrator import (ControllerConfig, RunStats, StepState, Trajectory, dense_eval,
                         embedded_advance, estimate_lte, integrate_adaptive, integrate_fixed,
                         start, step_fixed, step_variable)
from .oracle import OracleResult, evaluate_exact, rk_reference
from .problems import (PROBLEMS, OdeProblem, chebyshev_d2, line_problem, make_problem,
                       tele_problem, vand_problem)
from .stability import (StabilityGrid, scan_region, spectral_radius, spectral_radius_charpoly,
                        stability_matrix)

__version__ = "0.1.0"
