"""Parameter estimation for nonlinear ODE systems.

Simulate parameterized dynamical systems with fixed-step RK4, score trial
parameters against noisy trajectory data with a weighted least-squares
objective, and fit them with gradient descent, Levenberg-Marquardt, or
Nelder-Mead. Ships three benchmark problems (Lotka-Volterra, Van der Pol,
Rossler) and a reproducible benchmark/noise-sweep harness with a CLI.
"""

from ._backend import NUMBA_ENABLED
from .estimation import (
    Dataset,
    DatasetFormatError,
    Objective,
    cost,
    dataset_from_csv,
    dataset_to_csv,
    fd_gradient,
    fd_jacobian,
    residuals,
    rmse,
)
from .experiments import (
    RNG_IDENTITY,
    BenchmarkReport,
    ExperimentConfig,
    OptimizerRun,
    generate_dataset,
    initial_guess,
    noise_sweep,
    run_benchmark,
)
from .models import (
    LOTKA_VOLTERRA,
    ROSSLER,
    VAN_DER_POL,
    ProblemSpec,
    builtin_problems,
    get_problem,
    lotka_volterra_rhs,
    problem_names,
    rossler_rhs,
    van_der_pol_rhs,
)
from .ode_core import (
    DIVERGENCE_LIMIT,
    DynamicsModel,
    IntegrationDivergedError,
    TimeGrid,
    Trajectory,
    integrate,
    rk4_step,
)
from .optimizers import (
    CONVERGED,
    MAX_ITERATIONS,
    STALLED,
    GradientDescentConfig,
    LineSearchConfig,
    LMConfig,
    NelderMeadConfig,
    OptimizerResult,
    TraceRecord,
    gradient_descent,
    levenberg_marquardt,
    line_search_mu,
    nelder_mead,
    trace_to_csv,
)

__version__ = "0.1.0"

__all__ = [
    "NUMBA_ENABLED",
    "DIVERGENCE_LIMIT",
    "DynamicsModel",
    "IntegrationDivergedError",
    "TimeGrid",
    "Trajectory",
    "integrate",
    "rk4_step",
    "ProblemSpec",
    "builtin_problems",
    "get_problem",
    "problem_names",
    "lotka_volterra_rhs",
    "van_der_pol_rhs",
    "rossler_rhs",
    "LOTKA_VOLTERRA",
    "VAN_DER_POL",
    "ROSSLER",
    "Dataset",
    "DatasetFormatError",
    "Objective",
    "residuals",
    "cost",
    "fd_gradient",
    "fd_jacobian",
    "rmse",
    "dataset_to_csv",
    "dataset_from_csv",
    "OptimizerResult",
    "TraceRecord",
    "LineSearchConfig",
    "GradientDescentConfig",
    "LMConfig",
    "NelderMeadConfig",
    "line_search_mu",
    "gradient_descent",
    "levenberg_marquardt",
    "nelder_mead",
    "trace_to_csv",
    "CONVERGED",
    "MAX_ITERATIONS",
    "STALLED",
    "ExperimentConfig",
    "BenchmarkReport",
    "OptimizerRun",
    "RNG_IDENTITY",
    "generate_dataset",
    "initial_guess",
    "run_benchmark",
    "noise_sweep",
    "__version__",
]
