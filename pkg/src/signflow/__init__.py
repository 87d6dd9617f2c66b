"""Sample-and-hold sign-descent synthesis for controlled ODE and mean-field
flows on periodic and Euclidean state spaces."""

from .benchmarks import (BenchmarkInstance, available_benchmarks,
                         build_benchmark, build_toy_ode)
from .control import ControlBox, PiecewiseConstantControl
from .descent import (DescentConfig, RunReport, SampleHoldController,
                      run_descent, synthesize_window, verify_increment_formula)
from .exceptions import (CflViolationError, ConfigurationError,
                         DegenerateDensityError, DescentAbortedError,
                         IntegrationDivergedError)
from .flows import ControlSystem, OdeSystem, SolveCounter
from .geometry import ManifoldSpec, nearest_lift, wrap
from .meanfield import (DensityMatchingCost, GridDensity, LinearObservableCost,
                        MeanFieldSystem, VelocityGrid, advect_step,
                        attention_velocity, circular_mean, kuramoto_velocity,
                        linear_cost, matching_cost, order_parameter,
                        solve_continuity, trig_moments)

__version__ = "0.1.0"

__all__ = [
    "BenchmarkInstance", "available_benchmarks", "build_benchmark",
    "build_toy_ode", "ControlBox", "PiecewiseConstantControl",
    "DescentConfig", "RunReport", "SampleHoldController", "run_descent",
    "synthesize_window", "verify_increment_formula", "CflViolationError",
    "ConfigurationError", "DegenerateDensityError", "DescentAbortedError",
    "IntegrationDivergedError", "ControlSystem", "OdeSystem", "SolveCounter",
    "ManifoldSpec", "nearest_lift", "wrap", "DensityMatchingCost",
    "GridDensity", "LinearObservableCost", "MeanFieldSystem", "VelocityGrid",
    "advect_step", "attention_velocity", "circular_mean", "kuramoto_velocity",
    "linear_cost", "matching_cost", "order_parameter", "solve_continuity",
    "trig_moments", "__version__",
]
