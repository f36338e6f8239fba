"""Robot state containers, rigid-body model parameters, and config loading.

The robot is modeled as a single rigid body with constant inertia and four
massless 3-DoF legs. All quantities are SI; the world frame has +z up and
gravity acts along -z.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field, replace

import numpy as np

from .rotations import euler_to_rotation, rotation_to_euler

LEG_NAMES = ("FL", "FR", "RL", "RR")
# +1 for left-side legs (+y), -1 for right-side: mirrors the abduction offset.
LEG_SIDE_SIGN = (1.0, -1.0, 1.0, -1.0)


@dataclass(frozen=True)
class SrbModel:
    """Single-rigid-body parameters plus leg geometry.

    hip_offsets[i] is the thigh attachment point of leg i in the body frame;
    the abduction (roll) axis of the leg runs along body-x at a lateral
    distance l1 inboard of that point.
    """

    mass: float = 9.0
    inertia: np.ndarray = field(
        default_factory=lambda: np.diag([0.07, 0.26, 0.242])
    )
    hip_offsets: np.ndarray = field(
        default_factory=lambda: np.array(
            [
                [0.19, 0.049, 0.0],
                [0.19, -0.049, 0.0],
                [-0.19, 0.049, 0.0],
                [-0.19, -0.049, 0.0],
            ]
        )
    )
    l1: float = 0.062
    l2: float = 0.209
    l3: float = 0.195
    tau_max: float = 24.0
    g_mag: float = 9.81

    def __post_init__(self) -> None:
        inertia = np.asarray(self.inertia, dtype=float)
        if inertia.shape != (3, 3):
            raise ValueError("inertia must be 3x3")
        if np.linalg.norm(inertia - inertia.T) > 1e-12:
            raise ValueError("inertia must be symmetric")
        if np.any(np.linalg.eigvalsh(inertia) <= 0.0):
            raise ValueError("inertia must be positive definite")
        if self.mass <= 0.0 or self.l2 <= 0.0 or self.l3 <= 0.0:
            raise ValueError("mass and link lengths l2, l3 must be positive")
        if self.tau_max <= 0.0:
            raise ValueError("tau_max must be positive")
        object.__setattr__(self, "inertia", inertia)
        object.__setattr__(
            self, "hip_offsets", np.asarray(self.hip_offsets, dtype=float)
        )

    @property
    def inertia_inv(self) -> np.ndarray:
        return np.linalg.inv(self.inertia)

    @property
    def weight(self) -> float:
        return self.mass * self.g_mag

    def gravity_vec(self) -> np.ndarray:
        """World-frame gravitational acceleration (points down)."""
        return np.array([0.0, 0.0, -self.g_mag])


@dataclass(frozen=True)
class RobotState:
    """Body state plus joint state (12 joints, 3 per leg, FL FR RL RR)."""

    p_com: np.ndarray
    theta: np.ndarray
    R: np.ndarray
    v_com: np.ndarray
    omega_b: np.ndarray
    q: np.ndarray
    dq: np.ndarray

    @staticmethod
    def from_euler(
        p_com: np.ndarray,
        theta: np.ndarray,
        v_com: np.ndarray,
        omega_b: np.ndarray,
        q: np.ndarray,
        dq: np.ndarray,
    ) -> "RobotState":
        theta = np.asarray(theta, dtype=float)
        return RobotState(
            p_com=np.asarray(p_com, dtype=float),
            theta=theta,
            R=euler_to_rotation(theta),
            v_com=np.asarray(v_com, dtype=float),
            omega_b=np.asarray(omega_b, dtype=float),
            q=np.asarray(q, dtype=float),
            dq=np.asarray(dq, dtype=float),
        )

    def with_rotation(self, R: np.ndarray) -> "RobotState":
        """Copy with a new rotation; theta is re-derived to stay consistent."""
        return replace(self, R=R, theta=rotation_to_euler(R))


@dataclass(frozen=True)
class FootSet:
    """CoM-to-foot vectors (world frame) and per-foot contact flags."""

    r: np.ndarray  # (4, 3)
    contact: np.ndarray  # (4,) bool

    def __post_init__(self) -> None:
        object.__setattr__(self, "r", np.asarray(self.r, dtype=float))
        object.__setattr__(self, "contact", np.asarray(self.contact, dtype=bool))

    @property
    def contact_indices(self) -> list[int]:
        return [i for i in range(4) if self.contact[i]]

    @property
    def n_contacts(self) -> int:
        return int(np.count_nonzero(self.contact))


def _get(parser: configparser.ConfigParser, section: str, key: str, fallback):
    if parser.has_option(section, key):
        return float(parser.get(section, key))
    return fallback


def _get_vec(parser: configparser.ConfigParser, section: str, key: str, fallback):
    if parser.has_option(section, key):
        return np.array([float(tok) for tok in parser.get(section, key).split()])
    return np.asarray(fallback, dtype=float)


def load_model(path: str | None = None) -> SrbModel:
    """Build an SrbModel from an INI-style config file.

    Recognized sections/keys (all optional, defaults above):

        [model]            mass, tau_max, g_mag, inertia_diag = ixx iyy izz
        [model.geometry]   l1, l2, l3, hip_fl / hip_fr / hip_rl / hip_rr = x y z
    """
    base = SrbModel()
    if path is None:
        return base
    parser = configparser.ConfigParser()
    read = parser.read(path)
    if not read:
        raise FileNotFoundError(path)
    inertia = base.inertia
    if parser.has_option("model", "inertia_diag"):
        inertia = np.diag(_get_vec(parser, "model", "inertia_diag", np.diag(base.inertia)))
    hips = base.hip_offsets.copy()
    for i, name in enumerate(LEG_NAMES):
        hips[i] = _get_vec(parser, "model.geometry", f"hip_{name.lower()}", hips[i])
    return SrbModel(
        mass=_get(parser, "model", "mass", base.mass),
        inertia=inertia,
        hip_offsets=hips,
        l1=_get(parser, "model.geometry", "l1", base.l1),
        l2=_get(parser, "model.geometry", "l2", base.l2),
        l3=_get(parser, "model.geometry", "l3", base.l3),
        tau_max=_get(parser, "model", "tau_max", base.tau_max),
        g_mag=_get(parser, "model", "g_mag", base.g_mag),
    )
