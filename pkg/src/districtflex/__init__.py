"""districtflex: a district-scale building energy flexibility testbed.

Simulates N buildings (first-order thermal zones, heat pumps, PV,
batteries) and compares five coordination architectures on aggregate load
tracking, thermal comfort, and spatial control variability: a rule-based
controller, centralized MPC, independent SAC, MAPPO, and a hybrid
MPC+SAC hierarchy.
"""

from .simulation import (
    Action,
    AppliedAction,
    BuildingParams,
    BuildingState,
    Controller,
    Disturbance,
    DistrictTrace,
    StepView,
    aggregate_load,
    comfort_violation,
    run_episode,
    step_building,
)
from .scenario import (
    ReferenceSignal,
    Scenario,
    build_reference,
    compute_baseline,
    generate_synthetic_scenario,
    load_scenario,
    write_scenario,
)
from .metrics import MetricReport, comfort_metrics, cvrmse, metric_report, nmbe, spatial_variability
from .qp import QpSolution, QuadraticProgram, SolverSettings, SolveStatus, kkt_residuals, solve_qp

__version__ = "0.1.0"

__all__ = [
    "Action",
    "AppliedAction",
    "BuildingParams",
    "BuildingState",
    "Controller",
    "Disturbance",
    "DistrictTrace",
    "StepView",
    "aggregate_load",
    "comfort_violation",
    "run_episode",
    "step_building",
    "ReferenceSignal",
    "Scenario",
    "build_reference",
    "compute_baseline",
    "generate_synthetic_scenario",
    "load_scenario",
    "write_scenario",
    "MetricReport",
    "comfort_metrics",
    "cvrmse",
    "metric_report",
    "nmbe",
    "spatial_variability",
    "QpSolution",
    "QuadraticProgram",
    "SolverSettings",
    "SolveStatus",
    "kkt_residuals",
    "solve_qp",
    "__version__",
]
