"""Time-scheduled jump executive: Preparing -> Flight -> Landing.

Preparing tracks the minimum-jerk CoM trajectory through the VMC pipeline at
1 kHz; Flight holds a landing crouch with joint PD while the body is
ballistic; Landing re-engages the VMC at 500 Hz with a gravity-sum force
reference (zero roll/pitch, held yaw, CoM pinned over the touchdown point)
plus a joint-space PD. Phase transitions are purely time-triggered, but force
application is gated on each foot's actual contact.
"""

from __future__ import annotations

import enum
import json
import math
import time
from dataclasses import dataclass, field

import numpy as np

from .kinematics import stance_joint_angles
from .model import FootSet, SrbModel
from .planner import (
    BoundaryState,
    CommandOutOfRange,
    PiecewiseQuintic,
    PlannerConfig,
    plan_jump_trajectory,
)
from .rotations import yaw_rotation
from .sim import LowLevelCommand, SimConfig, SimState, SimulationDiverged, step
from .tracker import GrfInfeasible, VmcGains, VmcTracker


class Phase(enum.Enum):
    PREPARING = 0
    FLIGHT = 1
    LANDING = 2


class PlanningFailed(RuntimeError):
    pass


class TrackingFailed(RuntimeError):
    pass


class NoLanding(ValueError):
    """Ballistic arc never returns to the landing height."""


@dataclass(frozen=True)
class PhaseSchedule:
    t_prepare_end: float
    t_flight_end: float
    rate_prepare_hz: float = 1000.0
    rate_flight_hz: float = 1000.0
    rate_landing_hz: float = 500.0

    def __post_init__(self) -> None:
        if not (0.0 < self.t_prepare_end < self.t_flight_end):
            raise ValueError("require 0 < t_prepare_end < t_flight_end")


@dataclass(frozen=True)
class JumpCommand:
    """Takeoff end state expressed in the command (base-yaw) frame."""

    end_state: BoundaryState
    yaw_direction: float = 0.0

    @staticmethod
    def from_components(
        dp, v_end, az: float = 20.0, yaw_direction: float = 0.0
    ) -> "JumpCommand":
        return JumpCommand(
            end_state=BoundaryState(
                np.asarray(dp, dtype=float),
                np.asarray(v_end, dtype=float),
                np.array([0.0, 0.0, float(az)]),
            ),
            yaw_direction=float(yaw_direction),
        )


@dataclass(frozen=True)
class ExecutiveConfig:
    stance_height: float = 0.29
    flight_kp: float = 40.0
    flight_kd: float = 1.0
    landing_kp: float = 30.0
    landing_kd: float = 1.5
    settle_time: float = 1.0
    ref_omega: np.ndarray = field(default_factory=lambda: np.zeros(3))
    attitude_ok_rad: float = 0.2

    def __post_init__(self) -> None:
        object.__setattr__(self, "ref_omega", np.asarray(self.ref_omega, dtype=float))


@dataclass(frozen=True)
class JumpConfig:
    model: SrbModel = field(default_factory=SrbModel)
    gains: VmcGains = field(default_factory=VmcGains)
    planner: PlannerConfig = field(default_factory=PlannerConfig)
    sim: SimConfig = field(default_factory=SimConfig)
    executive: ExecutiveConfig = field(default_factory=ExecutiveConfig)


def phase_at(t: float, schedule: PhaseSchedule) -> Phase:
    """Left-closed time windows: t_prepare_end itself is already Flight."""
    if t < schedule.t_prepare_end:
        return Phase.PREPARING
    if t < schedule.t_flight_end:
        return Phase.FLIGHT
    return Phase.LANDING


def estimate_flight_duration(
    takeoff_v: np.ndarray, takeoff_p: np.ndarray, model: SrbModel, z_land: float
) -> float:
    """Larger root of p_z + v_z t - g t^2 / 2 = z_land."""
    v_z = float(takeoff_v[2])
    p_z = float(takeoff_p[2])
    disc = v_z * v_z + 2.0 * model.g_mag * (p_z - z_land)
    if disc < 0.0 or (v_z <= 0.0 and p_z <= z_land):
        raise NoLanding(f"v_z={v_z:.3g}, p_z={p_z:.3g} never reaches z={z_land:.3g}")
    return (v_z + math.sqrt(disc)) / model.g_mag


def _foot_set(sim: SimState) -> FootSet:
    return FootSet(r=sim.foot_w - sim.robot.p_com, contact=sim.contact)


def landing_pose(config: JumpConfig) -> np.ndarray:
    """Symmetric crouch: feet below the hips at the stance height."""
    feet_body = config.model.hip_offsets - np.array([0.0, 0.0, config.executive.stance_height])
    return stance_joint_angles(feet_body, config.model)


def _joint_pd(
    q: np.ndarray, dq: np.ndarray, q_des: np.ndarray, kp: float, kd: float
) -> np.ndarray:
    return kp * (q_des - q) - kd * dq


def prepare_tick(
    t: float,
    sim: SimState,
    traj: PiecewiseQuintic,
    tracker: VmcTracker,
    ref_R: np.ndarray,
    ref_omega: np.ndarray,
    stance_feet_w: np.ndarray,
) -> tuple[LowLevelCommand, "TickInfo"]:
    """Track the planned trajectory through the stance-force QP.

    Feet that momentarily unload (the reference crouch can out-accelerate
    gravity) drop out of the QP and are steered back toward their stance
    anchors by the Cartesian PD alone.
    """
    state = sim.robot
    feet = _foot_set(sim)
    ref_p = traj.evaluate(t, 0)
    ref_v = traj.evaluate(t, 1)
    # Stance feet hold still in world; their body-frame references move
    # opposite the planned CoM motion.
    ref_feet_p = (stance_feet_w - ref_p) @ ref_R
    ref_feet_v = np.tile(-(ref_R.T @ ref_v), (4, 1))
    if feet.n_contacts > 0:
        result = tracker.track(
            state, feet, ref_p, ref_v, ref_R, ref_omega, ref_feet_p, ref_feet_v
        )
        tau, grf, iters = result.tau, result.grf.f, result.qp_iterations
    else:
        from .tracker import grf_to_torques
        from .tracker import GrfCommand

        grf = np.zeros((4, 3))
        tau = grf_to_torques(
            state,
            feet,
            GrfCommand(f=grf, contact=feet.contact),
            ref_feet_p,
            ref_feet_v,
            tracker.gains,
            tracker.model,
        )
        iters = 0
    cmd = LowLevelCommand.torque_only(tau)
    return cmd, TickInfo(ref_p, ref_v, grf, tau, iters)


def flight_tick(
    t: float, sim: SimState, landing_q: np.ndarray, config: JumpConfig
) -> tuple[LowLevelCommand, "TickInfo"]:
    """Pure joint PD toward the landing crouch; no feedforward torque."""
    state = sim.robot
    exe = config.executive
    tau = np.clip(
        _joint_pd(state.q, state.dq, landing_q, exe.flight_kp, exe.flight_kd),
        -config.model.tau_max,
        config.model.tau_max,
    )
    cmd = LowLevelCommand(
        tau=tau,
        q_des=landing_q,
        dq_des=np.zeros(12),
        kp=np.full(12, exe.flight_kp),
        kd=np.full(12, exe.flight_kd),
    )
    return cmd, TickInfo(state.p_com, state.v_com, np.zeros((4, 3)), tau, 0)


def landing_tick(
    t: float,
    sim: SimState,
    tracker: VmcTracker,
    config: JumpConfig,
    ref_xy: np.ndarray,
    ref_R: np.ndarray,
    landing_q: np.ndarray,
) -> tuple[LowLevelCommand, "TickInfo"]:
    """VMC with gravity-sum references plus joint PD; swing feet get flight PD."""
    state = sim.robot
    exe = config.executive
    model = config.model
    feet = _foot_set(sim)
    ref_p = np.array(
        [ref_xy[0], ref_xy[1], config.sim.ground_height + exe.stance_height]
    )
    ref_v = np.zeros(3)
    tau = np.clip(
        _joint_pd(state.q, state.dq, landing_q, exe.flight_kp, exe.flight_kd),
        -model.tau_max,
        model.tau_max,
    )
    grf = np.zeros((4, 3))
    iterations = 0
    if feet.n_contacts > 0:
        from .tracker import feedforward_torque, solve_grf, virtual_accelerations
        from .kinematics import leg_jacobian

        a_ref, alpha_ref = virtual_accelerations(
            state, ref_p, ref_v, ref_R, exe.ref_omega, tracker.gains
        )
        grf_cmd, iterations = solve_grf(
            state, feet, a_ref, alpha_ref, tracker.gains, model, tracker.solver
        )
        grf = grf_cmd.f
        for i in feet.contact_indices:
            sl = slice(3 * i, 3 * i + 3)
            J = leg_jacobian(i, state.q[sl], model)
            tau_ff = feedforward_torque(J, state.R.T @ grf[i])
            pd = _joint_pd(
                state.q[sl], state.dq[sl], landing_q[sl], exe.landing_kp, exe.landing_kd
            )
            tau[sl] = np.clip(tau_ff + pd, -model.tau_max, model.tau_max)
    cmd = LowLevelCommand(
        tau=tau,
        q_des=landing_q,
        dq_des=np.zeros(12),
        kp=np.full(12, exe.landing_kp),
        kd=np.full(12, exe.landing_kd),
    )
    return cmd, TickInfo(ref_p, ref_v, grf, tau, iterations)


@dataclass
class TickInfo:
    ref_p: np.ndarray
    ref_v: np.ndarray
    grf: np.ndarray
    tau: np.ndarray
    qp_iterations: int


LOG_COLUMNS = (
    ["t", "phase"]
    + [f"ref_p{ax}" for ax in "xyz"]
    + [f"ref_v{ax}" for ax in "xyz"]
    + [f"p{ax}" for ax in "xyz"]
    + [f"v{ax}" for ax in "xyz"]
    + ["roll", "pitch", "yaw"]
    + [f"f{leg}{ax}" for leg in range(4) for ax in "xyz"]
    + [f"tau{j}" for j in range(12)]
    + ["qp_iterations", "solve_ns"]
    + [f"contact{leg}" for leg in range(4)]
)


@dataclass
class JumpLog:
    """Per-tick run record plus a summary block."""

    rows: np.ndarray
    summary: dict

    def write_csv(self, path) -> None:
        np.savetxt(
            path,
            self.rows,
            delimiter=",",
            header=",".join(LOG_COLUMNS),
            comments="",
            fmt="%.10g",
        )

    def write_summary(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.summary, fh, indent=2, sort_keys=True)
            fh.write("\n")

    @property
    def final_attitude(self) -> np.ndarray:
        return self.rows[-1, 14:17]


def run_jump(
    command: JumpCommand,
    initial: SimState,
    config: JumpConfig | None = None,
    validate: bool = True,
) -> tuple[JumpLog, SimState]:
    """Plan and execute one full jump against the simulator.

    Returns the tick log and the settled final state (reusable as the next
    jump's initial state). Raises PlanningFailed, TrackingFailed, or
    SimulationDiverged.
    """
    config = config or JumpConfig()
    model = config.model
    sim_state = initial
    robot = sim_state.robot

    heading = float(robot.theta[2]) + command.yaw_direction
    rot = yaw_rotation(heading)
    start = BoundaryState(robot.p_com.copy(), robot.v_com.copy(), np.zeros(3))
    end = BoundaryState(
        robot.p_com + rot @ command.end_state.p,
        rot @ command.end_state.v,
        rot @ command.end_state.a,
    )
    try:
        traj = plan_jump_trajectory(
            start, end, config.planner, command_yaw=heading, validate=validate
        )
    except CommandOutOfRange as exc:
        raise PlanningFailed(str(exc)) from exc

    try:
        flight_time = estimate_flight_duration(
            end.v, end.p, model, config.sim.ground_height + config.executive.stance_height
        )
    except NoLanding as exc:
        raise PlanningFailed(str(exc)) from exc
    schedule = PhaseSchedule(
        t_prepare_end=traj.t_end, t_flight_end=traj.t_end + flight_time
    )

    tracker = VmcTracker(config.gains, model)
    landing_q = landing_pose(config)
    ref_R = yaw_rotation(float(robot.theta[2]))
    ref_omega = config.executive.ref_omega
    stance_feet_w = sim_state.foot_w.copy()

    dt = config.sim.dt
    landing_divisor = max(1, int(round(1.0 / (schedule.rate_landing_hz * dt))))
    t_stop = schedule.t_flight_end + config.executive.settle_time
    n_steps = int(math.ceil(t_stop / dt))

    rows = np.empty((n_steps, len(LOG_COLUMNS)))
    takeoff_state: SimState | None = None
    apex_z = -np.inf
    latched_xy: np.ndarray | None = None
    last_cmd: LowLevelCommand | None = None
    last_info: TickInfo | None = None
    solve_times = []

    landing_start = int(math.ceil(schedule.t_flight_end / dt))
    last_phase: Phase | None = None
    for k in range(n_steps):
        t = k * dt
        phase = phase_at(t, schedule)
        try:
            if phase is Phase.PREPARING:
                t0 = time.perf_counter_ns()
                cmd, info = prepare_tick(
                    t, sim_state, traj, tracker, ref_R, ref_omega, stance_feet_w
                )
                solve_ns = time.perf_counter_ns() - t0
                solve_times.append(solve_ns)
            elif phase is Phase.FLIGHT:
                if takeoff_state is None:
                    takeoff_state = sim_state
                cmd, info = flight_tick(t, sim_state, landing_q, config)
                solve_ns = 0
            else:
                if latched_xy is None and sim_state.contact.any():
                    latched_xy = sim_state.robot.p_com[:2].copy()
                hold = (
                    last_phase is Phase.LANDING
                    and (k - landing_start) % landing_divisor != 0
                )
                if hold:
                    cmd, info = last_cmd, last_info
                    solve_ns = 0
                else:
                    xy = latched_xy if latched_xy is not None else sim_state.robot.p_com[:2]
                    t0 = time.perf_counter_ns()
                    cmd, info = landing_tick(
                        t, sim_state, tracker, config, xy, ref_R, landing_q
                    )
                    solve_ns = time.perf_counter_ns() - t0
                    solve_times.append(solve_ns)
        except GrfInfeasible as exc:
            raise TrackingFailed(f"t={t:.3f}s: {exc}") from exc
        last_phase = phase

        rows[k, 0] = t
        rows[k, 1] = phase.value
        rows[k, 2:5] = info.ref_p
        rows[k, 5:8] = info.ref_v
        rows[k, 8:11] = sim_state.robot.p_com
        rows[k, 11:14] = sim_state.robot.v_com
        rows[k, 14:17] = sim_state.robot.theta
        rows[k, 17:29] = info.grf.reshape(-1)
        rows[k, 29:41] = info.tau
        rows[k, 41] = info.qp_iterations
        rows[k, 42] = solve_ns
        rows[k, 43:47] = sim_state.contact.astype(float)

        last_cmd, last_info = cmd, info
        sim_state = step(sim_state, cmd, config.sim, model)
        if phase is not Phase.PREPARING:
            apex_z = max(apex_z, float(sim_state.robot.p_com[2]))

    final = sim_state
    takeoff = takeoff_state if takeoff_state is not None else final
    apex_rise = apex_z - float(takeoff.robot.p_com[2])
    solve_arr = np.array(solve_times, dtype=float)
    attitude = final.robot.theta
    landed = bool(final.contact.all()) and bool(
        np.all(np.abs(attitude[:2]) < config.executive.attitude_ok_rad)
    )
    summary = {
        "command": {
            "end_position": command.end_state.p.tolist(),
            "end_velocity": command.end_state.v.tolist(),
            "end_acceleration": command.end_state.a.tolist(),
            "yaw_direction": command.yaw_direction,
        },
        "phase_schedule": {
            "t_prepare_end": schedule.t_prepare_end,
            "t_flight_end": schedule.t_flight_end,
        },
        "takeoff_velocity": takeoff.robot.v_com.tolist(),
        "apex_height": apex_z,
        "apex_rise": apex_rise,
        "landing_attitude": attitude.tolist(),
        "final_position": final.robot.p_com.tolist(),
        "peak_torque": float(np.max(np.abs(rows[:, 29:41]))),
        "landed": landed,
        "latency": {
            "mean_ns": float(solve_arr.mean()) if solve_arr.size else 0.0,
            "p95_ns": float(np.percentile(solve_arr, 95)) if solve_arr.size else 0.0,
        },
    }
    return JumpLog(rows=rows, summary=summary), final
