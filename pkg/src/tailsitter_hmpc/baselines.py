"""Benchmark position controllers: cascaded PID, backstepping and sliding mode.

All three produce ``(T, phi_cmd, theta_cmd)`` for the attitude loop. Virtual
horizontal inputs are inverted with zero yaw::

    u_x = cos(phi_cmd) sin(theta_cmd)
    u_y = -sin(phi_cmd)

and both the virtual inputs and the thrust are clamped so every output is
bounded for any finite input.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .core import ControlInput, EulerAttitude, VehicleParams, Vec3


class TrackingError(NamedTuple):
    """``e = p_d - p`` and ``e_dot = v_d - v``."""

    e: Vec3
    e_dot: Vec3


@dataclass(frozen=True)
class BaselineGains:
    k_bx: tuple[float, float] = (1.0, 1.0)
    k_by: tuple[float, float] = (1.0, 1.0)
    k_bz: tuple[float, float] = (5.0, 1.0)
    k_sx: tuple[float, float] = (2.0, 1.0)
    k_sy: tuple[float, float] = (2.0, 1.0)
    k_sz: tuple[float, float] = (3.0, 2.5)
    pid_xy: tuple[float, float, float] = (2.0, 0.3, 1.5)
    pid_z: tuple[float, float, float] = (6.0, 0.5, 3.5)
    integral_limit: float = 1.0
    epsilon: float = 0.1
    angle_max: float = 0.6
    thrust_min_ratio: float = 0.1
    thrust_max_ratio: float = 2.0
    # verbatim-equation switches (see module notes)
    g_in_xy_rows: bool = False
    yaw_divisor: bool = False

    def __post_init__(self) -> None:
        gains = [*self.k_bx, *self.k_by, *self.k_bz, *self.k_sx, *self.k_sy, *self.k_sz, *self.pid_xy, *self.pid_z]
        if min(gains) < 0:
            raise ValueError("controller gains must be non-negative")
        if self.epsilon <= 0:
            raise ValueError("boundary layer epsilon must be positive")


def invert_virtual_inputs(u_x: float, u_y: float, angle_max: float) -> tuple[float, float, float, float]:
    """Angles realising ``(u_x, u_y)`` at zero yaw, with clamping.

    Returns ``(phi_cmd, theta_cmd, u_x_clamped, u_y_clamped)`` where the
    clamped pair is exactly what the returned angles reproduce.
    """
    lim = math.sin(angle_max)
    uy_c = min(max(u_y, -lim), lim)
    phi_cmd = -math.asin(uy_c)
    cphi = math.cos(phi_cmd)
    sin_theta = min(max(u_x / cphi, -lim), lim)
    theta_cmd = math.asin(sin_theta)
    return phi_cmd, theta_cmd, cphi * sin_theta, uy_c


def _thrust_divisor(att: EulerAttitude, gains: BaselineGains) -> float:
    if gains.yaw_divisor:
        return math.cos(att.phi) * math.cos(att.psi)
    return math.cos(att.phi) * math.cos(att.theta)


def _finish(T: float, ax: float, ay: float, params: VehicleParams, gains: BaselineGains) -> ControlInput:
    """Clamp thrust, form virtual inputs ``m a / T`` and invert them."""
    mg = params.m * params.g
    T = min(max(T, gains.thrust_min_ratio * mg), gains.thrust_max_ratio * mg)
    u_x = params.m / T * ax
    u_y = params.m / T * ay
    phi_cmd, theta_cmd, _, _ = invert_virtual_inputs(u_x, u_y, gains.angle_max)
    return ControlInput(T, phi_cmd, theta_cmd)


def backstepping_cmd(
    err: TrackingError, ref_acc: Vec3, att: EulerAttitude, gains: BaselineGains, params: VehicleParams
) -> ControlInput:
    """Backstepping law with gravity feedforward on the altitude row only."""
    e, ed = err
    g = params.g
    gx = g if gains.g_in_xy_rows else 0.0
    kx1, kx2 = gains.k_bx
    ky1, ky2 = gains.k_by
    kz1, kz2 = gains.k_bz
    T = params.m / _thrust_divisor(att, gains) * (e[2] + ref_acc[2] + kz1 * ed[2] + g + kz2 * e[2])
    ax = e[0] + ref_acc[0] + kx1 * ed[0] + gx + kx2 * e[0]
    ay = e[1] + ref_acc[1] + ky1 * ed[1] + gx + ky2 * e[1]
    return _finish(float(T), float(ax), float(ay), params, gains)


def sliding_mode_cmd(
    err: TrackingError, ref_acc: Vec3, att: EulerAttitude, gains: BaselineGains, params: VehicleParams
) -> ControlInput:
    """Sliding-mode law on ``s = k1 e + e_dot`` with a ``tanh(s / epsilon)`` boundary layer."""
    e, ed = err
    eps = gains.epsilon
    (kx1, kx2), (ky1, ky2), (kz1, kz2) = gains.k_sx, gains.k_sy, gains.k_sz
    s = (kx1 * e[0] + ed[0], ky1 * e[1] + ed[1], kz1 * e[2] + ed[2])
    T = params.m / _thrust_divisor(att, gains) * (
        kz1 * ed[2] + ref_acc[2] + params.g + kz2 * math.tanh(s[2] / eps)
    )
    ax = kx1 * ed[0] + ref_acc[0] + kx2 * math.tanh(s[0] / eps)
    ay = ky1 * ed[1] + ref_acc[1] + ky2 * math.tanh(s[1] / eps)
    return _finish(float(T), float(ax), float(ay), params, gains)


@dataclass
class PidState:
    integral: np.ndarray = field(default_factory=lambda: np.zeros(3))


def pid_cmd(
    err: TrackingError,
    state: PidState,
    gains: BaselineGains,
    params: VehicleParams,
    dt: float,
    att: EulerAttitude = EulerAttitude(),
    ref_acc: Vec3 | None = None,
) -> ControlInput:
    """Per-axis PID acceleration demand mapped through the same inversion.

    The integral is clamped to ``gains.integral_limit`` (anti-windup) and is
    updated in place on ``state``. ``ref_acc`` adds an optional acceleration
    feedforward; the benchmark PID runs without it.
    """
    e, ed = err
    state.integral = np.clip(state.integral + np.asarray(e) * dt, -gains.integral_limit, gains.integral_limit)
    kp = np.array([gains.pid_xy[0], gains.pid_xy[0], gains.pid_z[0]])
    ki = np.array([gains.pid_xy[1], gains.pid_xy[1], gains.pid_z[1]])
    kd = np.array([gains.pid_xy[2], gains.pid_xy[2], gains.pid_z[2]])
    a = kp * e + ki * state.integral + kd * ed
    if ref_acc is not None:
        a = a + ref_acc
    T = params.m * (params.g + float(a[2])) / _thrust_divisor(att, gains)
    return _finish(T, float(a[0]), float(a[1]), params, gains)


class PidController:
    """Stateful wrapper holding the integrator."""

    def __init__(self, gains: BaselineGains, params: VehicleParams, dt: float, feedforward: bool = False) -> None:
        self.gains, self.params, self.dt = gains, params, dt
        self.feedforward = feedforward
        self.state = PidState()

    def reset(self) -> None:
        self.state = PidState()

    def __call__(self, err: TrackingError, ref_acc: Vec3, att: EulerAttitude) -> ControlInput:
        ff = ref_acc if self.feedforward else None
        return pid_cmd(err, self.state, self.gains, self.params, self.dt, att, ff)
