"""3-DoF leg kinematics: forward kinematics, Jacobians, inverse kinematics.

Each leg is (abduction roll about body-x, hip pitch, knee pitch) with the
zero configuration pointing straight down: FK(0) = hip_offset + (0, 0, -(l2+l3)).
The abduction axis sits a lateral distance l1 inboard of the thigh plane, so
rolling the leg swings the plane around that axis. IK always returns the
knee-backward branch (q3 in [0, pi]).
"""

from __future__ import annotations

import math

import numpy as np

from .model import LEG_SIDE_SIGN, SrbModel


class OutOfReach(ValueError):
    """Raised when an IK target lies outside the leg workspace."""


def _rot_x(q: float) -> np.ndarray:
    c, s = math.cos(q), math.sin(q)
    return np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])


def _planar_foot(q2: float, q3: float, model: SrbModel) -> np.ndarray:
    s2, c2 = math.sin(q2), math.cos(q2)
    s23, c23 = math.sin(q2 + q3), math.cos(q2 + q3)
    return np.array(
        [-(model.l2 * s2 + model.l3 * s23), 0.0, -(model.l2 * c2 + model.l3 * c23)]
    )


def leg_forward_kinematics(leg_index: int, q_leg: np.ndarray, model: SrbModel) -> np.ndarray:
    """Foot position of one leg in the body frame."""
    side = LEG_SIDE_SIGN[leg_index]
    hip = model.hip_offsets[leg_index]
    axis_point = hip - np.array([0.0, side * model.l1, 0.0])
    arm = np.array([0.0, side * model.l1, 0.0]) + _planar_foot(q_leg[1], q_leg[2], model)
    return axis_point + _rot_x(q_leg[0]) @ arm


def leg_jacobian(leg_index: int, q_leg: np.ndarray, model: SrbModel) -> np.ndarray:
    """Partial of the body-frame foot position w.r.t. the three leg joints."""
    side = LEG_SIDE_SIGN[leg_index]
    q1, q2, q3 = q_leg
    Rx = _rot_x(q1)
    arm = np.array([0.0, side * model.l1, 0.0]) + _planar_foot(q2, q3, model)
    u = Rx @ arm
    s2, c2 = math.sin(q2), math.cos(q2)
    s23, c23 = math.sin(q2 + q3), math.cos(q2 + q3)
    col1 = np.array([0.0, -u[2], u[1]])  # rotation about body-x
    col2 = Rx @ np.array(
        [-(model.l2 * c2 + model.l3 * c23), 0.0, model.l2 * s2 + model.l3 * s23]
    )
    col3 = Rx @ np.array([-model.l3 * c23, 0.0, model.l3 * s23])
    return np.column_stack([col1, col2, col3])


def leg_inverse_kinematics(
    leg_index: int, p_foot: np.ndarray, model: SrbModel
) -> np.ndarray:
    """Joint angles reaching a body-frame foot target, knee-backward branch.

    Raises OutOfReach when the target violates the reach annulus
    |l2 - l3| <= d <= l2 + l3 (d measured in the thigh plane) or lies closer
    to the abduction axis than l1.
    """
    side = LEG_SIDE_SIGN[leg_index]
    hip = model.hip_offsets[leg_index]
    axis_point = hip - np.array([0.0, side * model.l1, 0.0])
    v = np.asarray(p_foot, dtype=float) - axis_point

    rho_sq = v[1] ** 2 + v[2] ** 2
    plane_sq = rho_sq - model.l1**2
    if plane_sq < -1e-12:
        raise OutOfReach(
            f"leg {leg_index}: target inside the abduction cylinder (rho^2={rho_sq:.6g})"
        )
    z_plane = -math.sqrt(max(0.0, plane_sq))
    q1 = math.atan2(v[2], v[1]) - math.atan2(z_plane, side * model.l1)
    q1 = math.atan2(math.sin(q1), math.cos(q1))

    u = -v[0]
    w = -z_plane
    d = math.hypot(u, w)
    d_min, d_max = abs(model.l2 - model.l3), model.l2 + model.l3
    if d > d_max + 1e-9 or d < d_min - 1e-9:
        raise OutOfReach(
            f"leg {leg_index}: planar distance {d:.6g} outside [{d_min:.6g}, {d_max:.6g}]"
        )
    cos_q3 = (d * d - model.l2**2 - model.l3**2) / (2.0 * model.l2 * model.l3)
    q3 = math.acos(max(-1.0, min(1.0, cos_q3)))
    q2 = math.atan2(u, w) - math.atan2(
        model.l3 * math.sin(q3), model.l2 + model.l3 * math.cos(q3)
    )
    return np.array([q1, q2, q3])


def stance_joint_angles(foot_positions_body: np.ndarray, model: SrbModel) -> np.ndarray:
    """IK of all four legs; foot_positions_body is (4, 3)."""
    q = np.empty(12)
    for i in range(4):
        q[3 * i : 3 * i + 3] = leg_inverse_kinematics(i, foot_positions_body[i], model)
    return q


def all_foot_positions(q: np.ndarray, model: SrbModel) -> np.ndarray:
    """FK of all four legs from the stacked 12-joint vector; returns (4, 3)."""
    p = np.empty((4, 3))
    for i in range(4):
        p[i] = leg_forward_kinematics(i, q[3 * i : 3 * i + 3], model)
    return p
