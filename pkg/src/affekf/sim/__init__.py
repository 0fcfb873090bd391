from .environment import (
    EnvironmentSpec,
    StepMeasurements,
    World,
    generate_environment,
    mean_observation_distance,
    simulate_measurements,
)
from .metrics import nees, rmse_series
from .runner import (
    MonteCarloReport,
    RunConfig,
    RunResult,
    aggregate_monte_carlo,
    run_filter,
)
from .csvio import export_csv
from .calibration import linear_gaussian_nees
from .equivalence import equivalence_check

__all__ = [
    "EnvironmentSpec",
    "MonteCarloReport",
    "RunConfig",
    "RunResult",
    "StepMeasurements",
    "World",
    "aggregate_monte_carlo",
    "equivalence_check",
    "export_csv",
    "generate_environment",
    "linear_gaussian_nees",
    "mean_observation_distance",
    "nees",
    "rmse_series",
    "run_filter",
    "simulate_measurements",
]
