"""Closed-loop single-rigid-body simulator with massless quasi-static legs.

Stance feet are anchored in world (no slip below the Coulomb limit) and their
ground reaction forces are recovered from the commanded joint torques through
the leg Jacobians; penetrating unanchored feet get a spring-damper contact
force. Swing legs track their torque commands through a small virtual servo
inertia. The body integrates at a fixed 1 kHz step; the position update uses
the trapezoidal (velocity-Verlet) form, which is exact for ballistic flight.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .kinematics import (
    OutOfReach,
    all_foot_positions,
    leg_forward_kinematics,
    leg_inverse_kinematics,
    leg_jacobian,
)
from .model import RobotState, SrbModel
from .rotations import euler_to_rotation, orthonormalize, rotation_to_euler, so3_exp

logger = logging.getLogger(__name__)


class SimulationDiverged(RuntimeError):
    """State became non-finite or left the configured envelope."""


@dataclass(frozen=True)
class SimConfig:
    dt: float = 1e-3
    ground_height: float = 0.0
    k_ground: float = 1e4
    d_ground: float = 100.0
    mu_sim: float = 0.6
    joint_inertia: float = 0.006  # virtual servo inertia for swing legs
    # A planted massless leg cannot pull, but transient unloading does not
    # lift the foot either; contact releases only after this many consecutive
    # zero-force steps (or on leg overextension).
    release_steps: int = 60
    position_limit: float = 100.0
    below_ground_limit: float = 0.2

    def __post_init__(self) -> None:
        if self.dt <= 0.0 or self.k_ground < 0.0 or self.d_ground < 0.0:
            raise ValueError("dt must be positive; contact constants non-negative")


@dataclass(frozen=True)
class LowLevelCommand:
    """Torque command plus PD setpoints carried for downstream consumers."""

    tau: np.ndarray
    q_des: np.ndarray
    dq_des: np.ndarray
    kp: np.ndarray
    kd: np.ndarray

    def __post_init__(self) -> None:
        for name in ("tau", "q_des", "dq_des", "kp", "kd"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float))

    @staticmethod
    def torque_only(tau: np.ndarray) -> "LowLevelCommand":
        z = np.zeros(12)
        return LowLevelCommand(tau=tau, q_des=z, dq_des=z, kp=z, kd=z)


@dataclass(frozen=True)
class SimState:
    robot: RobotState
    foot_w: np.ndarray  # (4, 3) world foot positions (anchors when in contact)
    contact: np.ndarray  # (4,) bool
    grf: np.ndarray  # (4, 3) forces applied during the previous step
    t: float = 0.0
    unloaded_steps: np.ndarray = field(default_factory=lambda: np.zeros(4, dtype=int))

    def __post_init__(self) -> None:
        object.__setattr__(self, "foot_w", np.asarray(self.foot_w, dtype=float))
        object.__setattr__(self, "contact", np.asarray(self.contact, dtype=bool))
        object.__setattr__(self, "grf", np.asarray(self.grf, dtype=float))
        object.__setattr__(
            self, "unloaded_steps", np.asarray(self.unloaded_steps, dtype=int)
        )


def apply_contact(foot_p: np.ndarray, foot_v: np.ndarray, config: SimConfig) -> np.ndarray:
    """Spring-damper ground force on one foot; zero above the ground plane.

    Normal: k * penetration + d * max(0, -v_z), never negative. Tangential:
    viscous opposition clamped to the Coulomb cone |f_t| <= mu * f_z.
    """
    penetration = config.ground_height - float(foot_p[2])
    if penetration <= 0.0:
        return np.zeros(3)
    f_z = config.k_ground * penetration + config.d_ground * max(0.0, -float(foot_v[2]))
    f_z = max(0.0, f_z)
    f_t = -config.d_ground * np.array([foot_v[0], foot_v[1]])
    limit = config.mu_sim * f_z
    norm_t = float(np.linalg.norm(f_t))
    if norm_t > limit and norm_t > 0.0:
        f_t *= limit / norm_t
    return np.array([f_t[0], f_t[1], f_z])


def standing_state(
    model: SrbModel,
    stance_height: float,
    config: SimConfig | None = None,
    xy: np.ndarray | None = None,
    yaw: float = 0.0,
) -> SimState:
    """Four-foot stance at rest with feet planted below the hips."""
    config = config or SimConfig()
    xy = np.zeros(2) if xy is None else np.asarray(xy, dtype=float)
    p_com = np.array([xy[0], xy[1], config.ground_height + stance_height])
    theta = np.array([0.0, 0.0, yaw])
    R = euler_to_rotation(theta)
    feet_body = model.hip_offsets - np.array([0.0, 0.0, stance_height])
    q = np.empty(12)
    foot_w = np.empty((4, 3))
    for i in range(4):
        q[3 * i : 3 * i + 3] = leg_inverse_kinematics(i, feet_body[i], model)
        foot_w[i] = p_com + R @ feet_body[i]
        foot_w[i, 2] = config.ground_height
    robot = RobotState(
        p_com=p_com,
        theta=theta,
        R=R,
        v_com=np.zeros(3),
        omega_b=np.zeros(3),
        q=q,
        dq=np.zeros(12),
    )
    return SimState(
        robot=robot,
        foot_w=foot_w,
        contact=np.ones(4, dtype=bool),
        grf=np.zeros((4, 3)),
        t=0.0,
    )


def _check_finite(state: SimState, config: SimConfig) -> None:
    p = state.robot.p_com
    if not (
        np.all(np.isfinite(p))
        and np.all(np.isfinite(state.robot.v_com))
        and np.all(np.isfinite(state.robot.q))
    ):
        raise SimulationDiverged("non-finite state")
    if float(np.linalg.norm(p)) > config.position_limit:
        raise SimulationDiverged(f"CoM ran away: |p| = {np.linalg.norm(p):.3g}")
    if p[2] < config.ground_height - config.below_ground_limit:
        raise SimulationDiverged(f"CoM below ground: z = {p[2]:.3g}")


def step(sim: SimState, cmd: LowLevelCommand, config: SimConfig, model: SrbModel) -> SimState:
    """Advance one fixed step under the commanded joint torques."""
    robot = sim.robot
    R = robot.R
    p_com = robot.p_com
    v_com = robot.v_com
    omega = robot.omega_b
    tau_cmd = np.clip(cmd.tau, -model.tau_max, model.tau_max)

    contact = sim.contact.copy()
    foot_w = sim.foot_w.copy()
    unloaded = sim.unloaded_steps.copy()
    forces = np.zeros((4, 3))
    levers = np.zeros((4, 3))

    for i in range(4):
        sl = slice(3 * i, 3 * i + 3)
        if contact[i]:
            levers[i] = foot_w[i] - p_com
            J = leg_jacobian(i, robot.q[sl], model)
            try:
                f_leg = -(R @ np.linalg.solve(J.T, tau_cmd[sl]))
            except np.linalg.LinAlgError:
                logger.warning("singular stance Jacobian on leg %d; zero force", i)
                f_leg = np.zeros(3)
            penetration = config.ground_height - foot_w[i, 2]
            if penetration > 0.0:
                f_leg = f_leg + np.array([0.0, 0.0, config.k_ground * penetration])
            if f_leg[2] <= 0.0:
                # unilateral ground: clamp to zero force, keep the foot
                # planted; sustained retraction intent releases it
                forces[i] = 0.0
                unloaded[i] += 1
                if unloaded[i] >= config.release_steps:
                    contact[i] = False
                    unloaded[i] = 0
                continue
            unloaded[i] = 0
            limit = config.mu_sim * f_leg[2]
            norm_t = math.hypot(f_leg[0], f_leg[1])
            if norm_t > limit:
                f_leg[0] *= limit / norm_t
                f_leg[1] *= limit / norm_t
            forces[i] = f_leg
        else:
            foot_b = leg_forward_kinematics(i, robot.q[sl], model)
            foot_world = p_com + R @ foot_b
            levers[i] = R @ foot_b
            J = leg_jacobian(i, robot.q[sl], model)
            foot_vel = v_com + R @ (np.cross(omega, foot_b) + J @ robot.dq[sl])
            forces[i] = apply_contact(foot_world, foot_vel, config)

    gravity = np.array([0.0, 0.0, -model.weight])
    net_force = forces.sum(axis=0) + gravity
    torque_w = np.zeros(3)
    for i in range(4):
        if np.any(forces[i]):
            torque_w += np.cross(levers[i], forces[i])
    torque_b = R.T @ torque_w

    a = net_force / model.mass
    omega_dot = model.inertia_inv @ (torque_b - np.cross(omega, model.inertia @ omega))
    dt = config.dt
    p_new = p_com + v_com * dt + 0.5 * a * dt * dt
    v_new = v_com + a * dt
    omega_new = omega + omega_dot * dt
    R_new = orthonormalize(R @ so3_exp(omega_new * dt))

    # Joint state: stance legs follow the anchors kinematically, swing legs
    # integrate their virtual servo under the commanded torque.
    q_new = robot.q.copy()
    dq_new = robot.dq.copy()
    foot_w_new = foot_w.copy()
    for i in range(4):
        sl = slice(3 * i, 3 * i + 3)
        if contact[i]:
            r_b = R_new.T @ (foot_w[i] - p_new)
            try:
                q_new[sl] = leg_inverse_kinematics(i, r_b, model)
            except OutOfReach:
                logger.warning("leg %d anchor out of reach; releasing contact", i)
                contact[i] = False
                continue
            J = leg_jacobian(i, q_new[sl], model)
            rdot_b = -(R_new.T @ v_new) - np.cross(omega_new, r_b)
            try:
                dq_new[sl] = np.linalg.solve(J, rdot_b)
            except np.linalg.LinAlgError:
                dq_new[sl] = 0.0
        else:
            ddq = tau_cmd[sl] / config.joint_inertia
            dq_new[sl] = robot.dq[sl] + ddq * dt
            q_new[sl] = robot.q[sl] + dq_new[sl] * dt

    robot_new = RobotState(
        p_com=p_new,
        theta=rotation_to_euler(R_new),
        R=R_new,
        v_com=v_new,
        omega_b=omega_new,
        q=q_new,
        dq=dq_new,
    )

    # Touchdown detection for swing feet: crossing the ground moving down.
    for i in range(4):
        if contact[i]:
            foot_w_new[i] = foot_w[i]
            continue
        sl = slice(3 * i, 3 * i + 3)
        foot_b = leg_forward_kinematics(i, q_new[sl], model)
        foot_world = p_new + R_new @ foot_b
        foot_w_new[i] = foot_world
        J = leg_jacobian(i, q_new[sl], model)
        foot_vel = v_new + R_new @ (np.cross(omega_new, foot_b) + J @ dq_new[sl])
        if foot_world[2] <= config.ground_height and foot_vel[2] < 0.0:
            contact[i] = True
            unloaded[i] = 0
            foot_w_new[i] = foot_world  # remembered penetration preloads the spring

    out = SimState(
        robot=robot_new,
        foot_w=foot_w_new,
        contact=contact,
        grf=forces,
        t=sim.t + dt,
        unloaded_steps=unloaded,
    )
    _check_finite(out, config)
    return out
