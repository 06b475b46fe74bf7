"""Python bindings for the platoon DNMPC simulator."""

from ._core import (
    HorizonTrajectory,
    NeighborData,
    NeighborTrajectory,
    OutputVec,
    PhysicalConstants,
    ScenarioError,
    SolveReport,
    SolveStatus,
    SolverOptions,
    Topology,
    VehicleParams,
    VehicleState,
    WeightSet,
    __version__,
    default_vehicle_params,
    desired_state,
    drag_force,
    equilibrium_torque,
    factorize,
    metric,
    objective,
    project_epd,
    project_subspace,
    rollout,
    run_scenario,
    run_scenario_text,
    shift_assumed,
    solve,
    step,
    t_conv_bound,
    validate_scenario_file,
)

__all__ = [
    "HorizonTrajectory",
    "NeighborData",
    "NeighborTrajectory",
    "OutputVec",
    "PhysicalConstants",
    "ScenarioError",
    "SolveReport",
    "SolveStatus",
    "SolverOptions",
    "Topology",
    "VehicleParams",
    "VehicleState",
    "WeightSet",
    "__version__",
    "default_vehicle_params",
    "desired_state",
    "drag_force",
    "equilibrium_torque",
    "factorize",
    "metric",
    "objective",
    "project_epd",
    "project_subspace",
    "rollout",
    "run_scenario",
    "run_scenario_text",
    "shift_assumed",
    "solve",
    "step",
    "t_conv_bound",
    "validate_scenario_file",
]
