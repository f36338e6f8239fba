"""Virtual-model trajectory tracking: reference CoM state -> GRFs -> torques.

A spring-damper virtual model turns tracking errors into desired CoM and
angular accelerations, a QP distributes those onto the stance feet subject to
friction-cone and normal-force bounds, and the contact Jacobian transpose
maps the forces to joint torques with an optional Cartesian PD correction.
Planner accelerations are deliberately not fed forward; all acceleration
comes from the virtual model.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .kinematics import leg_forward_kinematics, leg_jacobian
from .model import FootSet, RobotState, SrbModel
from .qp import DualActiveSetSolver, QpProblem, QpStatus
from .rotations import skew, so3_log


class NoContact(RuntimeError):
    """Stance-phase operation invoked with no feet in contact."""


class GrfInfeasible(RuntimeError):
    """The force-distribution QP has no feasible point under the cone."""


@dataclass(frozen=True)
class VmcGains:
    """Controller weights; defaults follow the hardware tuning tables."""

    kp_p: np.ndarray = field(default_factory=lambda: np.array([1070.0, 1070.0, 1070.0]))
    kd_p: np.ndarray = field(default_factory=lambda: np.array([12.0, 12.0, 10.0]))
    kp_w: np.ndarray = field(default_factory=lambda: np.array([800.0, 800.0, 800.0]))
    kd_w: np.ndarray = field(default_factory=lambda: np.array([20.0, 10.0, 20.0]))
    q_wrench: np.ndarray = field(
        default_factory=lambda: np.array([1.0, 1.0, 10.0, 20.0, 10.0, 25.0])
    )
    r_torque_leg: np.ndarray = field(
        default_factory=lambda: np.array([5.0, 50.0, 2.0]) * 1e-5
    )
    kcp: np.ndarray = field(default_factory=lambda: np.zeros(3))
    kcd: np.ndarray = field(default_factory=lambda: np.array([15.0, 15.0, 15.0]))
    mu: float = 0.5
    f_min: float = 5.0
    f_max: float = 250.0

    def __post_init__(self) -> None:
        for name in ("kp_p", "kd_p", "kp_w", "kd_w", "q_wrench", "r_torque_leg", "kcp", "kcd"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float))
        if self.mu <= 0.0 or self.f_min < 0.0 or self.f_min >= self.f_max:
            raise ValueError("require mu > 0 and 0 <= f_min < f_max")


@dataclass(frozen=True)
class GrfCommand:
    """World-frame foot forces (4, 3); rows for swing feet are zero."""

    f: np.ndarray
    contact: np.ndarray

    def __post_init__(self) -> None:
        object.__setattr__(self, "f", np.asarray(self.f, dtype=float))
        object.__setattr__(self, "contact", np.asarray(self.contact, dtype=bool))


def virtual_accelerations(
    state: RobotState,
    ref_p: np.ndarray,
    ref_v: np.ndarray,
    ref_R: np.ndarray,
    ref_omega: np.ndarray,
    gains: VmcGains,
) -> tuple[np.ndarray, np.ndarray]:
    """Spring-damper CoM acceleration and angular acceleration references.

    The attitude error is log(R^T R_ref), which makes a positive gain
    restoring.
    """
    a_ref = gains.kp_p * (ref_p - state.p_com) + gains.kd_p * (ref_v - state.v_com)
    e_rot = so3_log(state.R.T @ ref_R)
    alpha_ref = gains.kp_w * e_rot + gains.kd_w * (ref_omega - state.omega_b)
    return a_ref, alpha_ref


def build_srb_constraint(
    state: RobotState,
    feet: FootSet,
    a_ref: np.ndarray,
    alpha_ref: np.ndarray,
    model: SrbModel,
) -> tuple[np.ndarray, np.ndarray]:
    """Stance force-to-wrench map M (6x12, zero blocks for swing feet) and
    the demanded wrench N = [m a_ref + weight; I_B alpha_ref]."""
    if feet.n_contacts == 0:
        raise NoContact("SRB constraint needs at least one contact foot")
    M = np.zeros((6, 12))
    for i in feet.contact_indices:
        M[0:3, 3 * i : 3 * i + 3] = np.eye(3)
        M[3:6, 3 * i : 3 * i + 3] = skew(feet.r[i])
    N = np.empty(6)
    N[0:3] = model.mass * a_ref + np.array([0.0, 0.0, model.weight])
    N[3:6] = model.inertia @ alpha_ref
    return M, N


def build_friction_cone(
    feet: FootSet, gains: VmcGains
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Five double-bounded rows per contact foot on a flat ground normal:
    |f_x| <= mu f_z (2 rows), |f_y| <= mu f_z (2 rows), f_min <= f_z <= f_max."""
    n_c = feet.n_contacts
    if n_c < 1:
        raise NoContact("friction cone needs at least one contact foot")
    inf = np.inf
    G = np.zeros((5 * n_c, 3 * n_c))
    c_l = np.empty(5 * n_c)
    c_u = np.empty(5 * n_c)
    mu = gains.mu
    for k in range(n_c):
        r0, c0 = 5 * k, 3 * k
        G[r0 + 0, c0] = 1.0
        G[r0 + 0, c0 + 2] = -mu
        c_l[r0 + 0], c_u[r0 + 0] = -inf, 0.0
        G[r0 + 1, c0] = 1.0
        G[r0 + 1, c0 + 2] = mu
        c_l[r0 + 1], c_u[r0 + 1] = 0.0, inf
        G[r0 + 2, c0 + 1] = 1.0
        G[r0 + 2, c0 + 2] = -mu
        c_l[r0 + 2], c_u[r0 + 2] = -inf, 0.0
        G[r0 + 3, c0 + 1] = 1.0
        G[r0 + 3, c0 + 2] = mu
        c_l[r0 + 3], c_u[r0 + 3] = 0.0, inf
        G[r0 + 4, c0 + 2] = 1.0
        c_l[r0 + 4], c_u[r0 + 4] = gains.f_min, gains.f_max
    return G, c_l, c_u


def _stance_torque_blocks(
    state: RobotState, feet: FootSet, model: SrbModel
) -> list[np.ndarray]:
    """Per-contact-leg maps from world foot force to joint torque (J^T R^T)."""
    blocks = []
    for i in feet.contact_indices:
        J = leg_jacobian(i, state.q[3 * i : 3 * i + 3], model)
        blocks.append(J.T @ state.R.T)
    return blocks


def solve_grf(
    state: RobotState,
    feet: FootSet,
    a_ref: np.ndarray,
    alpha_ref: np.ndarray,
    gains: VmcGains,
    model: SrbModel,
    solver: DualActiveSetSolver | None = None,
) -> tuple[GrfCommand, int]:
    """Optimal stance forces: min |Mf - N|_Q^2 + |tau_ff|_R^2 under the cone.

    Returns the command and the QP iteration count. Raises GrfInfeasible when
    the cone admits no force set.
    """
    M_full, N = build_srb_constraint(state, feet, a_ref, alpha_ref, model)
    cols = []
    for i in feet.contact_indices:
        cols.extend(range(3 * i, 3 * i + 3))
    Mc = M_full[:, cols]
    Qw = np.diag(gains.q_wrench)
    H = 2.0 * (Mc.T @ Qw @ Mc)
    torque_blocks = _stance_torque_blocks(state, feet, model)
    R_leg = np.diag(gains.r_torque_leg)
    for k, B in enumerate(torque_blocks):
        sl = slice(3 * k, 3 * k + 3)
        H[sl, sl] += 2.0 * (B.T @ R_leg @ B)
    g = -2.0 * (Mc.T @ (Qw @ N))
    G, c_l, c_u = build_friction_cone(feet, gains)
    solution = (solver or DualActiveSetSolver()).solve(QpProblem(H, g, G, c_l, c_u))
    if solution.status is QpStatus.INFEASIBLE:
        raise GrfInfeasible("friction cone excludes every force distribution")
    if solution.status is QpStatus.MAX_ITERATIONS:
        raise GrfInfeasible("force-distribution QP hit the iteration limit")
    f = np.zeros((4, 3))
    for k, i in enumerate(feet.contact_indices):
        f[i] = solution.x[3 * k : 3 * k + 3]
    return GrfCommand(f=f, contact=feet.contact.copy()), solution.iterations


def feedforward_torque(J: np.ndarray, f_body: np.ndarray) -> np.ndarray:
    """Joint torque exerting -f_body on the ground through Jacobian J."""
    return -(J.T @ f_body)


def grf_to_torques(
    state: RobotState,
    feet: FootSet,
    grf: GrfCommand,
    ref_feet_p: np.ndarray,
    ref_feet_v: np.ndarray,
    gains: VmcGains,
    model: SrbModel,
) -> np.ndarray:
    """Map GRFs to the 12 joint torques with a Cartesian PD correction.

    Contact legs get the Jacobian-transpose feedforward plus PD; swing legs
    get pure Cartesian PD. Foot references are body-frame. The result is
    clamped to +-tau_max.
    """
    tau = np.zeros(12)
    for i in range(4):
        sl = slice(3 * i, 3 * i + 3)
        q_leg = state.q[sl]
        J = leg_jacobian(i, q_leg, model)
        p_f = leg_forward_kinematics(i, q_leg, model)
        v_f = J @ state.dq[sl]
        pd_force = gains.kcp * (ref_feet_p[i] - p_f) + gains.kcd * (ref_feet_v[i] - v_f)
        tau_leg = J.T @ pd_force
        if feet.contact[i]:
            tau_leg = tau_leg + feedforward_torque(J, state.R.T @ grf.f[i])
        tau[sl] = tau_leg
    return np.clip(tau, -model.tau_max, model.tau_max)


@dataclass
class TrackResult:
    tau: np.ndarray
    grf: GrfCommand
    a_ref: np.ndarray
    alpha_ref: np.ndarray
    qp_iterations: int


class VmcTracker:
    """One tracking pipeline instance: holds gains, model, and QP workspace."""

    def __init__(self, gains: VmcGains, model: SrbModel) -> None:
        self.gains = gains
        self.model = model
        self.solver = DualActiveSetSolver()

    def track(
        self,
        state: RobotState,
        feet: FootSet,
        ref_p: np.ndarray,
        ref_v: np.ndarray,
        ref_R: np.ndarray,
        ref_omega: np.ndarray,
        ref_feet_p: np.ndarray,
        ref_feet_v: np.ndarray,
    ) -> TrackResult:
        a_ref, alpha_ref = virtual_accelerations(
            state, ref_p, ref_v, ref_R, ref_omega, self.gains
        )
        grf, iterations = solve_grf(
            state, feet, a_ref, alpha_ref, self.gains, self.model, self.solver
        )
        tau = grf_to_torques(
            state, feet, grf, ref_feet_p, ref_feet_v, self.gains, self.model
        )
        return TrackResult(
            tau=tau, grf=grf, a_ref=a_ref, alpha_ref=alpha_ref, qp_iterations=iterations
        )
