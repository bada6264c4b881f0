"""Shared vehicle-state types and attitude helpers.

Frames: inertial z points up, gravity is ``(0, 0, -g)``. Euler angles use the
yaw-pitch-roll (ZYX) sequence, so with zero yaw the body thrust axis maps to
``(cos(phi) sin(theta), -sin(phi), cos(phi) cos(theta))`` in the inertial frame.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from numpy.typing import NDArray

Vec3 = NDArray[np.float64]

GRAVITY = 9.81


def vec3(x: float = 0.0, y: float = 0.0, z: float = 0.0) -> Vec3:
    """Build a finite 3-vector."""
    out = np.array([x, y, z], dtype=np.float64)
    if not np.all(np.isfinite(out)):
        raise ValueError(f"non-finite vector component: {out}")
    return out


class EulerAttitude(NamedTuple):
    """Roll, pitch, yaw in radians."""

    phi: float = 0.0
    theta: float = 0.0
    psi: float = 0.0


class ControlInput(NamedTuple):
    """Collective thrust [N] and roll/pitch angle commands [rad]."""

    thrust: float
    phi_cmd: float = 0.0
    theta_cmd: float = 0.0


@dataclass(frozen=True)
class VehicleParams:
    """Controller-side vehicle model.

    ``c_d*`` are the signed quadratic drag coefficients used only by the
    nonlinear (drag-augmented) prediction model; they are expected negative.
    """

    m: float = 0.83
    g: float = GRAVITY
    tau_phi: float = 0.15
    tau_theta: float = 0.15
    c_dx: float = 0.0
    c_dy: float = 0.0
    c_dz: float = 0.0

    def __post_init__(self) -> None:
        if self.m <= 0:
            raise ValueError("mass must be positive")
        if self.tau_phi <= 0 or self.tau_theta <= 0:
            raise ValueError("attitude time constants must be positive")

    @property
    def hover_thrust(self) -> float:
        return self.m * self.g

    @property
    def drag(self) -> Vec3:
        return np.array([self.c_dx, self.c_dy, self.c_dz])


@dataclass
class UavState:
    """Inertial position/velocity plus Euler attitude."""

    p: Vec3 = field(default_factory=lambda: np.zeros(3))
    v: Vec3 = field(default_factory=lambda: np.zeros(3))
    att: EulerAttitude = field(default_factory=EulerAttitude)

    def __post_init__(self) -> None:
        self.p = np.asarray(self.p, dtype=np.float64).reshape(3)
        self.v = np.asarray(self.v, dtype=np.float64).reshape(3)
        self.att = EulerAttitude(*map(float, self.att))

    def as_mpc_state(self) -> NDArray[np.float64]:
        """Pack into the 8-vector ``[x y z u v w phi theta]``."""
        return np.concatenate([self.p, self.v, [self.att.phi, self.att.theta]])

    @classmethod
    def from_mpc_state(cls, x: NDArray[np.float64]) -> UavState:
        x = np.asarray(x, dtype=np.float64)
        return cls(x[0:3].copy(), x[3:6].copy(), EulerAttitude(x[6], x[7], 0.0))


def euler_to_rotation(att: EulerAttitude) -> NDArray[np.float64]:
    """Body-to-inertial rotation ``Rz(psi) @ Ry(theta) @ Rx(phi)``."""
    phi, theta, psi = att
    cf, sf = math.cos(phi), math.sin(phi)
    ct, st = math.cos(theta), math.sin(theta)
    cp, sp = math.cos(psi), math.sin(psi)
    return np.array(
        [
            [cp * ct, cp * st * sf - sp * cf, cp * st * cf + sp * sf],
            [sp * ct, sp * st * sf + cp * cf, sp * st * cf - cp * sf],
            [-st, ct * sf, ct * cf],
        ]
    )


def rotation_to_euler(R: NDArray[np.float64]) -> EulerAttitude:
    """Inverse of :func:`euler_to_rotation` away from ``|theta| = pi/2``."""
    theta = -math.asin(max(-1.0, min(1.0, R[2, 0])))
    phi = math.atan2(R[2, 1], R[2, 2])
    psi = math.atan2(R[1, 0], R[0, 0])
    return EulerAttitude(phi, theta, psi)
