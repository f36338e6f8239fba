"""Strictly convex QP solver for double-bounded linear inequalities.

Solves   min 1/2 x^T H x + g^T x   s.t.   c_l <= G x <= c_u

with a dense Goldfarb-Idnani dual active-set method: start at the
unconstrained optimum, repeatedly add the most violated constraint, and take
mixed primal/dual steps, dropping active constraints whose multipliers would
go negative. Rows with c_l == c_u are treated as equalities; bounds beyond
+-1e19 as absent. Problems here are small (n <= 32, m <= 64).
"""

from __future__ import annotations

import enum
import logging
from dataclasses import dataclass

import numpy as np

logger = logging.getLogger(__name__)

INFINITY_THRESHOLD = 1e19
_VIOLATION_TOL = 1e-10
_REGULARIZATION = 1e-10


class QpStatus(enum.Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    MAX_ITERATIONS = "max_iterations"


class Side(enum.Enum):
    LOWER = "lower"
    UPPER = "upper"
    EQUALITY = "equality"


@dataclass(frozen=True)
class QpProblem:
    H: np.ndarray
    g: np.ndarray
    G: np.ndarray
    c_l: np.ndarray
    c_u: np.ndarray

    def __post_init__(self) -> None:
        H = np.asarray(self.H, dtype=float)
        g = np.asarray(self.g, dtype=float)
        G = np.asarray(self.G, dtype=float).reshape(-1, H.shape[0])
        c_l = np.asarray(self.c_l, dtype=float)
        c_u = np.asarray(self.c_u, dtype=float)
        if np.max(np.abs(H - H.T), initial=0.0) > 1e-12:
            raise ValueError("H must be symmetric")
        both = (c_l > -INFINITY_THRESHOLD) & (c_u < INFINITY_THRESHOLD)
        if np.any(c_l[both] > c_u[both]):
            raise ValueError("c_l must be <= c_u componentwise")
        for name, value in (("H", H), ("g", g), ("G", G), ("c_l", c_l), ("c_u", c_u)):
            object.__setattr__(self, name, value)

    @property
    def n(self) -> int:
        return self.H.shape[0]

    @property
    def m(self) -> int:
        return self.G.shape[0]

    def objective(self, x: np.ndarray) -> float:
        return float(0.5 * x @ self.H @ x + self.g @ x)

    def to_text(self) -> str:
        """Plain-text round-trippable dump for regression fixtures."""
        lines = [f"{self.n} {self.m}"]
        for row in self.H:
            lines.append(" ".join(f"{v:.17g}" for v in row))
        lines.append(" ".join(f"{v:.17g}" for v in self.g))
        for row in self.G:
            lines.append(" ".join(f"{v:.17g}" for v in row))
        lines.append(" ".join(f"{v:.17g}" for v in self.c_l))
        lines.append(" ".join(f"{v:.17g}" for v in self.c_u))
        return "\n".join(lines) + "\n"

    @staticmethod
    def from_text(text: str) -> "QpProblem":
        rows = [line.split() for line in text.strip().splitlines()]
        n, m = int(rows[0][0]), int(rows[0][1])
        vals = [[float(tok) for tok in row] for row in rows[1:]]
        H = np.array(vals[:n])
        g = np.array(vals[n])
        G = np.array(vals[n + 1 : n + 1 + m]).reshape(m, n)
        c_l = np.array(vals[n + 1 + m])
        c_u = np.array(vals[n + 2 + m])
        return QpProblem(H, g, G, c_l, c_u)


@dataclass(frozen=True)
class QpSolution:
    x: np.ndarray
    active_set: tuple  # of (row index, Side)
    multipliers: np.ndarray  # signed: >0 pushes on the upper bound, <0 lower
    status: QpStatus
    iterations: int


@dataclass
class _Constraint:
    """One-sided working constraint n^T x >= b (unit normal)."""

    normal: np.ndarray
    bound: float
    row: int
    side: Side
    scale: float  # original row norm, to map duals back


def _expand(problem: QpProblem) -> tuple[list[_Constraint], list[_Constraint]]:
    equalities: list[_Constraint] = []
    inequalities: list[_Constraint] = []
    for i in range(problem.m):
        row = problem.G[i]
        norm = float(np.linalg.norm(row))
        if norm == 0.0:
            continue
        lo, hi = float(problem.c_l[i]), float(problem.c_u[i])
        unit = row / norm
        if lo == hi:
            equalities.append(_Constraint(unit, lo / norm, i, Side.EQUALITY, norm))
            continue
        if lo > -INFINITY_THRESHOLD:
            inequalities.append(_Constraint(unit, lo / norm, i, Side.LOWER, norm))
        if hi < INFINITY_THRESHOLD:
            inequalities.append(_Constraint(-unit, -hi / norm, i, Side.UPPER, norm))
    return equalities, inequalities


def _factorize(H: np.ndarray) -> tuple[np.ndarray, bool]:
    """Cholesky factor, escalating the documented 1e-10 ridge on failure."""
    for attempt in range(8):
        reg = 0.0 if attempt == 0 else _REGULARIZATION * (10.0 ** (attempt - 1))
        try:
            L = np.linalg.cholesky(H if reg == 0.0 else H + reg * np.eye(H.shape[0]))
            return L, reg > 0.0
        except np.linalg.LinAlgError:
            continue
    raise ValueError("H is not positive definite even after regularization")


class DualActiveSetSolver:
    """Dual active-set QP solver; one instance per control loop."""

    def solve(self, problem: QpProblem) -> QpSolution:
        L, regularized = _factorize(problem.H)
        if regularized:
            logger.warning("QP Hessian regularized to restore positive definiteness")

        def h_solve(b: np.ndarray) -> np.ndarray:
            return np.linalg.solve(L.T, np.linalg.solve(L, b))

        x = h_solve(-problem.g)
        equalities, inequalities = _expand(problem)
        constraints = equalities + inequalities
        n_eq = len(equalities)

        active: list[int] = []
        duals: list[float] = []
        max_changes = 10 * (problem.n + problem.m)
        changes = 0
        status = QpStatus.OPTIMAL

        def fail(s: QpStatus) -> QpSolution:
            return QpSolution(
                x=x,
                active_set=tuple(),
                multipliers=np.zeros(problem.m),
                status=s,
                iterations=changes,
            )

        eq_queue = list(range(n_eq))
        while True:
            # Pick the next target: pending equalities first, then the most
            # violated inequality (ties break on the lowest expanded index).
            if eq_queue:
                p = eq_queue.pop(0)
                con = constraints[p]
                v = float(con.normal @ x - con.bound)
                if v > _VIOLATION_TOL:
                    # work on the flipped orientation so the violation is < 0
                    con.normal = -con.normal
                    con.bound = -con.bound
                    con.scale = -con.scale
                is_equality = True
            else:
                p, worst = -1, -_VIOLATION_TOL
                active_set_ids = set(active)
                for idx in range(n_eq, len(constraints)):
                    if idx in active_set_ids:
                        continue
                    con = constraints[idx]
                    v = float(con.normal @ x - con.bound)
                    if v < worst:
                        worst, p = v, idx
                if p < 0:
                    break
                is_equality = False

            u_new = 0.0
            while True:
                con = constraints[p]
                v = float(con.normal @ x - con.bound)
                if v >= -_VIOLATION_TOL:
                    if is_equality:
                        active.append(p)
                        duals.append(u_new)
                        changes += 1
                    elif u_new > 0.0:
                        active.append(p)
                        duals.append(u_new)
                        changes += 1
                    # a satisfied inequality with zero dual needs no entry
                    break

                h = h_solve(con.normal)
                if active:
                    N = np.column_stack([constraints[k].normal for k in active])
                    Y = h_solve(N)
                    S = N.T @ Y
                    rhs = N.T @ h
                    try:
                        r = np.linalg.solve(S, rhs)
                    except np.linalg.LinAlgError:
                        r = np.linalg.lstsq(S, rhs, rcond=None)[0]
                    z = h - Y @ r
                else:
                    r = np.zeros(0)
                    z = h

                zn = float(z @ con.normal)
                t_full = np.inf if zn <= 1e-14 else -v / zn
                t_partial, blocker = np.inf, -1
                for j, k in enumerate(active):
                    if constraints[k].side is Side.EQUALITY:
                        continue
                    if r[j] > 1e-14:
                        ratio = duals[j] / r[j]
                        if ratio < t_partial:
                            t_partial, blocker = ratio, j
                if not np.isfinite(min(t_full, t_partial)):
                    return fail(QpStatus.INFEASIBLE)

                if t_partial < t_full:
                    # partial step: blocking dual hits zero, drop it
                    step = t_partial
                    if np.isfinite(t_full):
                        x = x + step * z
                    for j in range(len(active)):
                        duals[j] -= step * r[j]
                    u_new += step
                    active.pop(blocker)
                    duals.pop(blocker)
                    changes += 1
                else:
                    step = t_full
                    x = x + step * z
                    for j in range(len(active)):
                        duals[j] -= step * r[j]
                    u_new += step
                    active.append(p)
                    duals.append(u_new)
                    changes += 1
                    break
                if changes > max_changes:
                    return fail(QpStatus.MAX_ITERATIONS)
            if changes > max_changes:
                return fail(QpStatus.MAX_ITERATIONS)

        multipliers = np.zeros(problem.m)
        active_rows = []
        for j, k in enumerate(active):
            con = constraints[k]
            lam = duals[j] / con.scale  # flipped equalities carry scale < 0
            if con.side is Side.UPPER:
                multipliers[con.row] += lam
            else:
                multipliers[con.row] -= lam
            active_rows.append((con.row, con.side))
        return QpSolution(
            x=x,
            active_set=tuple(active_rows),
            multipliers=multipliers,
            status=status,
            iterations=changes,
        )


def solve(problem: QpProblem) -> QpSolution:
    return DualActiveSetSolver().solve(problem)


def kkt_residual(problem: QpProblem, x: np.ndarray, multipliers: np.ndarray) -> float:
    """Max-norm KKT residual: stationarity, feasibility, complementarity.

    multipliers follow the signed convention of QpSolution: positive entries
    push against the upper bound, negative against the lower.
    """
    x = np.asarray(x, dtype=float)
    mu = np.asarray(multipliers, dtype=float)
    residual = float(np.max(np.abs(problem.H @ x + problem.g + problem.G.T @ mu), initial=0.0))
    gx = problem.G @ x
    for i in range(problem.m):
        lo, hi = problem.c_l[i], problem.c_u[i]
        if lo > -INFINITY_THRESHOLD:
            residual = max(residual, float(lo - gx[i]))
        if hi < INFINITY_THRESHOLD:
            residual = max(residual, float(gx[i] - hi))
        if lo == hi:
            continue
        if mu[i] > 0.0 and hi < INFINITY_THRESHOLD:
            residual = max(residual, abs(mu[i] * (gx[i] - hi)))
        elif mu[i] < 0.0 and lo > -INFINITY_THRESHOLD:
            residual = max(residual, abs(mu[i] * (gx[i] - lo)))
    return residual
