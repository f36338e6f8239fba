"""Three-segment quintic CoM trajectory planning with minimum integrated jerk.

Each axis is a piecewise 5th-order polynomial in segment-local time. Boundary
position/velocity/acceleration and the interior waypoint positions are fixed;
interior velocities and accelerations are free and recovered in closed form
by eliminating them from the quadratic jerk cost:

    d_free = -R_pp^-1 R_fp^T d_fixed,   R = C M^-T Q M^-1 C^T

where M maps polynomial coefficients to segment endpoint derivatives, Q is
the integrated-squared-jerk Hessian, and C splits the stacked endpoint
derivatives into fixed and free blocks.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

DURATION_FLOOR = 0.02


class CommandOutOfRange(ValueError):
    """End state outside the configured command box."""


class IllConditioned(RuntimeError):
    """The free-derivative system is numerically unusable."""


@dataclass(frozen=True)
class BoundaryState:
    """Position / velocity / acceleration triple for one trajectory endpoint."""

    p: np.ndarray
    v: np.ndarray
    a: np.ndarray

    def __post_init__(self) -> None:
        for name in ("p", "v", "a"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float))

    @staticmethod
    def rest(p) -> "BoundaryState":
        return BoundaryState(np.asarray(p, dtype=float), np.zeros(3), np.zeros(3))


@dataclass(frozen=True)
class CommandRanges:
    """Allowed takeoff command box (displacement in the command frame)."""

    pos: tuple = (0.15, 0.1, 0.05)
    vel_xy: tuple = (0.3, 0.16)
    vel_z: tuple = (1.5, 3.5)
    acc_xy: tuple = (20.0, 20.0)
    acc_z: tuple = (10.0, 40.0)


@dataclass(frozen=True)
class PlannerConfig:
    v_max: float = 0.8
    a_max: float = 12.0
    duration_floor: float = DURATION_FLOOR
    # Segment times from the positional trapezoid are stretched so the
    # commanded takeoff speed never implies a mean acceleration above this,
    # then capped so preparation stays within prepare_time_cap.
    takeoff_accel_budget: float = 5.5
    prepare_time_cap: float = 0.5
    # 'quintic' samples interior waypoints from the one-segment minimum-jerk
    # interpolant (lets the crouch dip below the chord, keeping the required
    # support force above the normal-force floor); 'line' pins them to the
    # straight start-to-end chord at the trapezoid phase boundaries.
    waypoints: str = "quintic"
    cost_order: int = 3  # 3 = jerk; 4 (snap) runs but is unvalidated
    ranges: CommandRanges = field(default_factory=CommandRanges)


@dataclass(frozen=True)
class PiecewiseQuintic:
    """Per-axis segment coefficients (3, n_seg, 6) and absolute knot times."""

    coeffs: np.ndarray
    knots: np.ndarray

    def __post_init__(self) -> None:
        object.__setattr__(self, "coeffs", np.asarray(self.coeffs, dtype=float))
        object.__setattr__(self, "knots", np.asarray(self.knots, dtype=float))
        if np.any(np.diff(self.knots) <= 0.0):
            raise ValueError("knots must be strictly increasing")

    @property
    def n_segments(self) -> int:
        return self.coeffs.shape[1]

    @property
    def t_start(self) -> float:
        return float(self.knots[0])

    @property
    def t_end(self) -> float:
        return float(self.knots[-1])

    def evaluate(self, t: float, order: int = 0) -> np.ndarray:
        """Order-th time derivative of the trajectory at time t (clamped)."""
        t = min(max(t, self.t_start), self.t_end)
        j = int(np.searchsorted(self.knots, t, side="right") - 1)
        j = min(max(j, 0), self.n_segments - 1)
        tau = t - self.knots[j]
        out = np.zeros(3)
        for i in range(order, 6):
            fac = 1.0
            for k in range(i, i - order, -1):
                fac *= k
            out += fac * tau ** (i - order) * self.coeffs[:, j, i]
        return out

    def boundary_state(self, t: float) -> BoundaryState:
        return BoundaryState(self.evaluate(t, 0), self.evaluate(t, 1), self.evaluate(t, 2))

    def jerk_cost(self, order: int = 3) -> float:
        """Integral of the squared order-th derivative, summed over axes."""
        total = 0.0
        for j in range(self.n_segments):
            Q = build_jerk_hessian(float(self.knots[j + 1] - self.knots[j]), order)
            for ax in range(3):
                p = self.coeffs[ax, j]
                total += float(p @ Q @ p)
        return total

    def export_csv(self, path, rate_hz: float = 1000.0) -> None:
        """Sampled trajectory: t, x, y, z, vx, vy, vz, ax, ay, az."""
        n = max(2, int(round((self.t_end - self.t_start) * rate_hz)) + 1)
        ts = np.linspace(self.t_start, self.t_end, n)
        rows = np.empty((n, 10))
        for i, t in enumerate(ts):
            rows[i, 0] = t
            rows[i, 1:4] = self.evaluate(t, 0)
            rows[i, 4:7] = self.evaluate(t, 1)
            rows[i, 7:10] = self.evaluate(t, 2)
        header = "t,x,y,z,vx,vy,vz,ax,ay,az"
        np.savetxt(path, rows, delimiter=",", header=header, comments="", fmt="%.12g")


def allocate_times(
    p_start: np.ndarray,
    p_end: np.ndarray,
    v_max: float,
    a_max: float,
    duration_floor: float = DURATION_FLOOR,
) -> np.ndarray:
    """Trapezoidal-velocity time split over the straight-line distance.

    Returns [t_accelerate, t_cruise, t_decelerate]; degenerate distances fall
    back to the duration floor (triangle profiles get a floor-length cruise).
    """
    d = float(np.linalg.norm(np.asarray(p_end, dtype=float) - np.asarray(p_start, dtype=float)))
    t_acc = v_max / a_max
    d_acc = 0.5 * v_max * t_acc
    if d <= 2.0 * duration_floor**2 * a_max:  # too short for any real profile
        return np.array([duration_floor] * 3)
    if 2.0 * d_acc <= d:
        t_cruise = (d - 2.0 * d_acc) / v_max
    else:
        v_peak = math.sqrt(a_max * d)
        t_acc = v_peak / a_max
        t_cruise = 0.0
    return np.maximum([t_acc, t_cruise, t_acc], duration_floor)


def trapezoid_fractions(
    p_start: np.ndarray, p_end: np.ndarray, durations: np.ndarray, a_max: float
) -> tuple[float, float]:
    """Fractions of the straight-line distance covered after segments 1 and 2."""
    d = float(np.linalg.norm(np.asarray(p_end, dtype=float) - np.asarray(p_start, dtype=float)))
    if d <= 0.0:
        return 0.5, 0.5
    t_acc = float(durations[0])
    d_acc = 0.5 * a_max * t_acc**2
    v_peak = a_max * t_acc
    d_cruise = v_peak * float(durations[1])
    # Renormalize: floor clamps can make the pieces disagree with d slightly.
    total = 2.0 * d_acc + d_cruise
    if total <= 0.0:
        return 0.5, 0.5
    f1 = d_acc / total
    f2 = (d_acc + d_cruise) / total
    return min(f1, 1.0), min(f2, 1.0)


def build_jerk_hessian(T: float, order: int = 3) -> np.ndarray:
    """Gram matrix of the integrated squared order-th derivative on [0, T]."""
    Q = np.zeros((6, 6))
    for i in range(order, 6):
        ci = 1.0
        for k in range(i, i - order, -1):
            ci *= k
        for j in range(order, 6):
            cj = 1.0
            for k in range(j, j - order, -1):
                cj *= k
            power = i + j - 2 * order + 1
            Q[i, j] = ci * cj * T**power / power
    return Q


def build_mapping_matrix(T: float) -> np.ndarray:
    """Maps coefficients to [s(0), s'(0), s''(0), s(T), s'(T), s''(T)]."""
    M = np.zeros((6, 6))
    M[0, 0] = 1.0
    M[1, 1] = 1.0
    M[2, 2] = 2.0
    for i in range(6):
        M[3, i] = T**i
        if i >= 1:
            M[4, i] = i * T ** (i - 1)
        if i >= 2:
            M[5, i] = i * (i - 1) * T ** (i - 2)
    return M


def _derivative_index_split(n_seg: int) -> tuple[list[int], list[int]]:
    """Fixed/free index lists into the stacked unique derivative vector.

    Unique derivatives are (p, v, a) at each of the n_seg + 1 knots. Fixed:
    all three at both ends plus interior positions, ordered
    [p0, v0, a0, p_1 .. p_{n-1}, p_n, v_n, a_n]. Free: interior v and a.
    """
    fixed = [0, 1, 2]
    fixed += [3 * j for j in range(1, n_seg)]
    fixed += [3 * n_seg, 3 * n_seg + 1, 3 * n_seg + 2]
    free: list[int] = []
    for j in range(1, n_seg):
        free += [3 * j + 1, 3 * j + 2]
    return fixed, free


def coefficients_from_derivatives(
    fixed: np.ndarray, free: np.ndarray, durations: np.ndarray
) -> np.ndarray:
    """C2 interpolant through explicit derivative values (no optimization).

    fixed/free follow the ordering of _derivative_index_split; columns may be
    stacked for several axes. Returns (n_seg, 6) or (n_seg, 6, n_axes).
    """
    durations = np.asarray(durations, dtype=float)
    n_seg = durations.shape[0]
    fixed = np.asarray(fixed, dtype=float)
    free = np.asarray(free, dtype=float)
    single = fixed.ndim == 1
    if single:
        fixed = fixed[:, None]
        free = free[:, None] if free.size else free.reshape(0, 1)
    idx_fixed, idx_free = _derivative_index_split(n_seg)
    d = np.zeros((3 * (n_seg + 1), fixed.shape[1]))
    d[idx_fixed] = fixed
    if idx_free:
        d[idx_free] = free
    coeffs = np.empty((n_seg, 6, fixed.shape[1]))
    for j in range(n_seg):
        M = build_mapping_matrix(float(durations[j]))
        coeffs[j] = np.linalg.solve(M, d[3 * j : 3 * j + 6])
    return coeffs[:, :, 0] if single else coeffs


def solve_closed_form(
    fixed_derivatives: np.ndarray,
    durations: np.ndarray,
    order: int = 3,
    cond_limit: float = 1e12,
) -> np.ndarray:
    """Minimum-cost coefficients for one axis (or stacked axes).

    fixed_derivatives holds [p0, v0, a0, interior positions..., pN, vN, aN];
    a trailing axis dimension is carried through. Returns segment coefficients
    shaped (n_seg, 6) (or (n_seg, 6, n_axes)).

    Raises IllConditioned when the free-block condition number exceeds
    cond_limit, which signals pathological segment durations.
    """
    durations = np.asarray(durations, dtype=float)
    n_seg = durations.shape[0]
    fixed = np.asarray(fixed_derivatives, dtype=float)
    single = fixed.ndim == 1
    if single:
        fixed = fixed[:, None]
    n_unique = 3 * (n_seg + 1)
    if fixed.shape[0] != n_unique - 2 * (n_seg - 1):
        raise ValueError("fixed derivative vector has the wrong length")

    R = np.zeros((n_unique, n_unique))
    for j in range(n_seg):
        M = build_mapping_matrix(float(durations[j]))
        Q = build_jerk_hessian(float(durations[j]), order)
        Minv = np.linalg.inv(M)
        G = Minv.T @ Q @ Minv
        sl = slice(3 * j, 3 * j + 6)
        R[sl, sl] += G

    idx_fixed, idx_free = _derivative_index_split(n_seg)
    if idx_free:
        R_pp = R[np.ix_(idx_free, idx_free)]
        R_fp = R[np.ix_(idx_fixed, idx_free)]
        if np.linalg.cond(R_pp) > cond_limit:
            raise IllConditioned("free-derivative block condition number exceeds limit")
        free = np.linalg.solve(R_pp, -R_fp.T @ fixed)
    else:
        free = np.zeros((0, fixed.shape[1]))
    coeffs = coefficients_from_derivatives(fixed, free, durations)
    return coeffs[:, :, 0] if single else coeffs


def validate_command(
    delta_p: np.ndarray, v_end: np.ndarray, a_end: np.ndarray, ranges: CommandRanges
) -> None:
    """Raise CommandOutOfRange unless the command lies inside the box."""
    px, py, pz = ranges.pos
    for value, bound, name in (
        (delta_p[0], px, "end position x"),
        (delta_p[1], py, "end position y"),
        (delta_p[2], pz, "end position z"),
        (v_end[0], ranges.vel_xy[0], "end velocity x"),
        (v_end[1], ranges.vel_xy[1], "end velocity y"),
        (a_end[0], ranges.acc_xy[0], "end acceleration x"),
        (a_end[1], ranges.acc_xy[1], "end acceleration y"),
    ):
        if abs(value) > bound + 1e-12:
            raise CommandOutOfRange(f"{name} {value:.4g} exceeds +-{bound:.4g}")
    if not (ranges.vel_z[0] - 1e-12 <= v_end[2] <= ranges.vel_z[1] + 1e-12):
        raise CommandOutOfRange(
            f"end velocity z {v_end[2]:.4g} outside [{ranges.vel_z[0]}, {ranges.vel_z[1]}]"
        )
    if not (ranges.acc_z[0] - 1e-12 <= a_end[2] <= ranges.acc_z[1] + 1e-12):
        raise CommandOutOfRange(
            f"end acceleration z {a_end[2]:.4g} outside [{ranges.acc_z[0]}, {ranges.acc_z[1]}]"
        )


def plan_jump_trajectory(
    start: BoundaryState,
    end: BoundaryState,
    config: PlannerConfig | None = None,
    command_yaw: float = 0.0,
    validate: bool = True,
) -> PiecewiseQuintic:
    """Plan the takeoff CoM trajectory from start to the commanded end state.

    Interior waypoints sit on the straight start-to-end line at the fractions
    of distance covered by the trapezoid phases; segment durations stretch
    uniformly when the takeoff speed demands more time than the positional
    trapezoid provides. command_yaw is the heading of the command box, used
    only for range validation.
    """
    config = config or PlannerConfig()
    delta = end.p - start.p
    if validate:
        c, s = math.cos(command_yaw), math.sin(command_yaw)
        unrot = np.array(
            [
                [c, s, 0.0],
                [-s, c, 0.0],
                [0.0, 0.0, 1.0],
            ]
        )
        validate_command(unrot @ delta, unrot @ end.v, unrot @ end.a, config.ranges)

    durations = allocate_times(
        start.p, end.p, config.v_max, config.a_max, config.duration_floor
    )
    speed = float(np.linalg.norm(end.v - start.v))
    t_needed = speed / config.takeoff_accel_budget
    total = float(np.sum(durations))
    if t_needed > total:
        durations = durations * (t_needed / total)
        total = t_needed
    if total > config.prepare_time_cap:
        durations = durations * (config.prepare_time_cap / total)

    knots = np.concatenate([[0.0], np.cumsum(durations)])
    if config.waypoints == "line":
        f1, f2 = trapezoid_fractions(start.p, end.p, durations, config.a_max)
        w1 = start.p + f1 * delta
        w2 = start.p + f2 * delta
    else:
        boundary = np.column_stack(
            [
                np.concatenate([start.p[a : a + 1], start.v[a : a + 1], start.a[a : a + 1],
                                end.p[a : a + 1], end.v[a : a + 1], end.a[a : a + 1]])
                for a in range(3)
            ]
        )
        single = solve_closed_form(boundary, np.array([knots[-1]]), config.cost_order)
        guide = PiecewiseQuintic(
            coeffs=np.transpose(single, (2, 0, 1)), knots=np.array([0.0, knots[-1]])
        )
        w1 = guide.evaluate(knots[1], 0)
        w2 = guide.evaluate(knots[2], 0)

    fixed = np.empty((8, 3))
    fixed[0] = start.p
    fixed[1] = start.v
    fixed[2] = start.a
    fixed[3] = w1
    fixed[4] = w2
    fixed[5] = end.p
    fixed[6] = end.v
    fixed[7] = end.a
    coeffs = solve_closed_form(fixed, durations, config.cost_order)  # (3, 6, 3)
    return PiecewiseQuintic(coeffs=np.transpose(coeffs, (2, 0, 1)), knots=knots)
