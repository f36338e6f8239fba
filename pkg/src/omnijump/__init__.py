"""Fast omnidirectional quadruped jumping: planner, tracker, simulator, CLI."""

from .executive import (
    ExecutiveConfig,
    JumpCommand,
    JumpConfig,
    JumpLog,
    Phase,
    PhaseSchedule,
    PlanningFailed,
    TrackingFailed,
    estimate_flight_duration,
    phase_at,
    run_jump,
)
from .kinematics import (
    OutOfReach,
    leg_forward_kinematics,
    leg_inverse_kinematics,
    leg_jacobian,
)
from .model import FootSet, RobotState, SrbModel, load_model
from .planner import (
    BoundaryState,
    CommandOutOfRange,
    IllConditioned,
    PiecewiseQuintic,
    PlannerConfig,
    allocate_times,
    build_jerk_hessian,
    build_mapping_matrix,
    plan_jump_trajectory,
    solve_closed_form,
)
from .qp import DualActiveSetSolver, QpProblem, QpSolution, QpStatus, kkt_residual
from .sim import LowLevelCommand, SimConfig, SimState, SimulationDiverged, standing_state, step
from .tracker import (
    GrfCommand,
    GrfInfeasible,
    NoContact,
    VmcGains,
    VmcTracker,
    build_friction_cone,
    build_srb_constraint,
    grf_to_torques,
    solve_grf,
    virtual_accelerations,
)

__version__ = "0.1.0"
