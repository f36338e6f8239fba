"""Rotation utilities shared by the model, controller, and simulator.

Conventions: the attitude vector is (roll, pitch, yaw) and rotation matrices
map body-frame vectors into the world frame, composed ZYX:
R = Rz(yaw) @ Ry(pitch) @ Rx(roll).
"""

from __future__ import annotations

import math

import numpy as np

_LOG_EPS_SMALL = 1e-8
_LOG_EPS_PI = 1e-6


def skew(v: np.ndarray) -> np.ndarray:
    """3x3 cross-product matrix: skew(v) @ w == cross(v, w)."""
    x, y, z = v
    return np.array([[0.0, -z, y], [z, 0.0, -x], [-y, x, 0.0]])


def euler_to_rotation(theta: np.ndarray) -> np.ndarray:
    """Body-to-world rotation from (roll, pitch, yaw), ZYX composition."""
    cr, sr = math.cos(theta[0]), math.sin(theta[0])
    cp, sp = math.cos(theta[1]), math.sin(theta[1])
    cy, sy = math.cos(theta[2]), math.sin(theta[2])
    return np.array(
        [
            [cy * cp, cy * sp * sr - sy * cr, cy * sp * cr + sy * sr],
            [sy * cp, sy * sp * sr + cy * cr, sy * sp * cr - cy * sr],
            [-sp, cp * sr, cp * cr],
        ]
    )


def rotation_to_euler(R: np.ndarray) -> np.ndarray:
    """Inverse of euler_to_rotation away from the pitch = +-pi/2 gimbal lock."""
    pitch = math.asin(max(-1.0, min(1.0, -R[2, 0])))
    roll = math.atan2(R[2, 1], R[2, 2])
    yaw = math.atan2(R[1, 0], R[0, 0])
    return np.array([roll, pitch, yaw])


def so3_exp(w: np.ndarray) -> np.ndarray:
    """Matrix exponential of skew(w) (Rodrigues, series near zero angle)."""
    angle = math.sqrt(float(w[0] ** 2 + w[1] ** 2 + w[2] ** 2))
    K = skew(w)
    K2 = K @ K
    if angle < _LOG_EPS_SMALL:
        # 2nd-order series keeps the round-trip tight at tiny angles.
        return np.eye(3) + K + 0.5 * K2
    a = math.sin(angle) / angle
    b = (1.0 - math.cos(angle)) / (angle * angle)
    return np.eye(3) + a * K + b * K2


def so3_log(R: np.ndarray) -> np.ndarray:
    """Axis-angle vector of a rotation matrix, norm in [0, pi].

    The angle ~ pi branch extracts the axis from the dominant diagonal entry
    of R + I instead of dividing by sin(angle) ~ 0.
    """
    trace = R[0, 0] + R[1, 1] + R[2, 2]
    cos_angle = max(-1.0, min(1.0, 0.5 * (trace - 1.0)))
    angle = math.acos(cos_angle)
    if angle < _LOG_EPS_SMALL:
        return 0.5 * np.array([R[2, 1] - R[1, 2], R[0, 2] - R[2, 0], R[1, 0] - R[0, 1]])
    if math.pi - angle < _LOG_EPS_PI:
        # R ~ 2*axis*axis^T - I, so the largest diagonal picks the axis.
        diag = np.array([R[0, 0], R[1, 1], R[2, 2]])
        k = int(np.argmax(diag))
        axis = np.empty(3)
        axis[k] = math.sqrt(max(0.0, (diag[k] + 1.0) * 0.5))
        i, j = [m for m in range(3) if m != k]
        axis[i] = (R[i, k] + R[k, i]) / (4.0 * axis[k])
        axis[j] = (R[j, k] + R[k, j]) / (4.0 * axis[k])
        # Off-diagonal skew part fixes the sign lost by the square root.
        sign_probe = np.array([R[2, 1] - R[1, 2], R[0, 2] - R[2, 0], R[1, 0] - R[0, 1]])
        if float(sign_probe @ axis) < 0.0:
            axis = -axis
        return angle * axis / float(np.linalg.norm(axis))
    scale = angle / (2.0 * math.sin(angle))
    return scale * np.array([R[2, 1] - R[1, 2], R[0, 2] - R[2, 0], R[1, 0] - R[0, 1]])


def orthonormalize(R: np.ndarray) -> np.ndarray:
    """Project a near-rotation matrix back onto SO(3) (polar projection)."""
    U, _, Vt = np.linalg.svd(R)
    out = U @ Vt
    if np.linalg.det(out) < 0.0:
        out = U @ np.diag([1.0, 1.0, -1.0]) @ Vt
    return out


def yaw_rotation(yaw: float) -> np.ndarray:
    """Rotation about the world z axis."""
    c, s = math.cos(yaw), math.sin(yaw)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])
