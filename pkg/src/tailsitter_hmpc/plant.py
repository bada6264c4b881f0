"""Synthetic ground-truth tail-sitter plant.

Translational Newton-Euler dynamics with a hand-built aerodynamic model
(anisotropic quadratic drag, a flat-plate wing normal force and a
thrust-proportional propeller-wing term), a rate-limited first-order attitude
loop, a first-order motor lag, optional wind gusts and motion-capture style
pose noise. The controllers never see the truth parameters defined here.

The integrator works on a packed 9-vector ``[x y z u v w phi theta T]`` of
plain floats because it is the innermost loop of every experiment.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import NamedTuple

import numpy as np
from numpy.typing import NDArray

from .core import ControlInput, EulerAttitude, UavState, VehicleParams, Vec3

STATE_SIZE = 9


@dataclass(frozen=True)
class TruthAeroParams:
    """Truth-side aerodynamic gains (body frame; x is the wing normal)."""

    k_quad: tuple[float, float, float] = (0.25, 0.14, 0.15)
    k_lift: float = 0.12
    k_pw: float = 0.03

    def __post_init__(self) -> None:
        if min(self.k_quad) < 0 or self.k_lift < 0 or self.k_pw < 0:
            raise ValueError("aerodynamic gains must be non-negative")
        # an all-zero drag vector switches quadratic drag off (used by tests)
        if any(self.k_quad) and self.k_quad[0] <= self.k_quad[1]:
            raise ValueError("the wing-normal (body x) drag gain must exceed the body y gain")


@dataclass(frozen=True)
class WindField:
    """Wind model: ``none``, ``constant`` (mean only) or ``gusty`` (mean + OU gust)."""

    mode: str = "none"
    mean: tuple[float, float, float] = (0.0, 0.0, 0.0)
    gust_sigma: float = 0.0
    gust_corr_time: float = 1.0

    def __post_init__(self) -> None:
        if self.mode not in ("none", "constant", "gusty"):
            raise ValueError(f"unknown wind mode {self.mode!r}")
        if self.gust_sigma < 0:
            raise ValueError("gust_sigma must be non-negative")

    @classmethod
    def constant(cls, x: float = 0.0, y: float = 0.0, z: float = 0.0) -> WindField:
        return cls("constant", (x, y, z))


@dataclass(frozen=True)
class PlantConfig:
    params: VehicleParams = field(default_factory=VehicleParams)
    aero: TruthAeroParams = field(default_factory=TruthAeroParams)
    tau_phi_true: float = 0.18
    tau_theta_true: float = 0.12
    att_rate_limit: float = 6.0
    motor_tau: float = 0.05
    noise_pos_sigma: float = 1e-3
    noise_att_sigma: float = math.radians(0.2)
    dt_sim: float = 0.002
    rng_seed: int = 0

    def __post_init__(self) -> None:
        if self.dt_sim <= 0:
            raise ValueError("dt_sim must be positive")
        if self.noise_pos_sigma < 0 or self.noise_att_sigma < 0:
            raise ValueError("noise sigmas must be non-negative")
        if self.tau_phi_true <= 0 or self.tau_theta_true <= 0:
            raise ValueError("attitude time constants must be positive")

    def noiseless(self) -> PlantConfig:
        return replace(self, noise_pos_sigma=0.0, noise_att_sigma=0.0)


@dataclass
class PlantState:
    state: UavState = field(default_factory=UavState)
    thrust_actual: float = 0.0
    wind_gust_state: Vec3 = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self) -> None:
        if self.thrust_actual < 0:
            raise ValueError("thrust_actual must be non-negative")

    def pack(self) -> list[float]:
        s = self.state
        return [*s.p.tolist(), *s.v.tolist(), s.att.phi, s.att.theta, float(self.thrust_actual)]

    @classmethod
    def unpack(cls, s: list[float] | NDArray[np.float64], gust: Vec3 | None = None) -> PlantState:
        s = [float(c) for c in s]
        state = UavState(np.array(s[0:3]), np.array(s[3:6]), EulerAttitude(s[6], s[7], 0.0))
        g = np.zeros(3) if gust is None else np.array(gust, dtype=np.float64)
        return cls(state, max(s[8], 0.0), g)

    @classmethod
    def hover(cls, params: VehicleParams, p: Vec3 | None = None, v: Vec3 | None = None) -> PlantState:
        p = np.zeros(3) if p is None else np.asarray(p, dtype=np.float64)
        v = np.zeros(3) if v is None else np.asarray(v, dtype=np.float64)
        return cls(UavState(p, v), params.hover_thrust)


class PoseMeasurement(NamedTuple):
    """Motion-capture output: position and attitude only (no velocity)."""

    p: Vec3
    att: EulerAttitude


def _aero_body(bx: float, by: float, bz: float, thrust: float, aero: TruthAeroParams) -> tuple[float, float, float]:
    kx, ky, kz = aero.k_quad
    # flat plate: |v_perp|^2 sin(2 alpha) with v_perp = (bx, bz) reduces to 2 bx |bz|
    fx = -kx * bx * abs(bx) - 2.0 * aero.k_lift * bx * abs(bz) - aero.k_pw * thrust * bx
    fy = -ky * by * abs(by)
    fz = -kz * bz * abs(bz)
    return fx, fy, fz


def true_aero_force(v_body_air: Vec3, thrust: float, aero: TruthAeroParams) -> Vec3:
    """Aerodynamic force in the body frame [N].

    Parameters
    ----------
    v_body_air : vehicle velocity relative to the air, body axes [m/s].
    thrust : actual collective thrust [N]; scales the propeller-wing term.
    aero : truth gains.
    """
    bx, by, bz = (float(c) for c in v_body_air)
    return np.array(_aero_body(bx, by, bz, float(thrust), aero))


def truth_residual(features, cfg: PlantConfig, wind: Vec3 | None = None) -> Vec3:
    """Exact residual acceleration of the plant for ``[u v w phi theta T]`` (inertial, m/s^2).

    This is what a perfect learned model would output: the aerodynamic force
    rotated to the inertial frame and divided by mass.
    """
    u, v, w, phi, theta, thrust = (float(c) for c in features)
    wx, wy, wz = (0.0, 0.0, 0.0) if wind is None else (float(c) for c in wind)
    cf, sf = math.cos(phi), math.sin(phi)
    ct, st = math.cos(theta), math.sin(theta)
    ru, rv, rw = u - wx, v - wy, w - wz
    bx = ct * ru - st * rw
    by = st * sf * ru + cf * rv + ct * sf * rw
    bz = st * cf * ru - sf * rv + ct * cf * rw
    fx, fy, fz = _aero_body(bx, by, bz, thrust, cfg.aero)
    m = cfg.params.m
    return np.array([
        (ct * fx + st * sf * fy + st * cf * fz) / m,
        (cf * fy - sf * fz) / m,
        (-st * fx + ct * sf * fy + ct * cf * fz) / m,
    ])  # fmt: skip


class _Consts(NamedTuple):
    m: float
    g: float
    tau_phi: float
    tau_theta: float
    rate_limit: float
    motor_tau: float
    aero: TruthAeroParams


def _consts(cfg: PlantConfig) -> _Consts:
    return _Consts(
        cfg.params.m,
        cfg.params.g,
        cfg.tau_phi_true,
        cfg.tau_theta_true,
        cfg.att_rate_limit,
        cfg.motor_tau,
        cfg.aero,
    )


def _deriv(s: list[float], cmd: tuple[float, float, float], wind: tuple[float, float, float], c: _Consts) -> list[float]:
    _, _, _, u, v, w, phi, theta, thrust = s
    cf, sf = math.cos(phi), math.sin(phi)
    ct, st = math.cos(theta), math.sin(theta)
    # R = Ry(theta) Rx(phi); relative air velocity rotated into the body frame
    ru, rv, rw = u - wind[0], v - wind[1], w - wind[2]
    bx = ct * ru - st * rw
    by = st * sf * ru + cf * rv + ct * sf * rw
    bz = st * cf * ru - sf * rv + ct * cf * rw
    fx, fy, fz = _aero_body(bx, by, bz, thrust, c.aero)
    fz += thrust
    inv_m = 1.0 / c.m
    ax = (ct * fx + st * sf * fy + st * cf * fz) * inv_m
    ay = (cf * fy - sf * fz) * inv_m
    az = (-st * fx + ct * sf * fy + ct * cf * fz) * inv_m - c.g

    rl = c.rate_limit
    dphi = (cmd[1] - phi) / c.tau_phi
    dtheta = (cmd[2] - theta) / c.tau_theta
    if rl > 0:
        dphi = min(max(dphi, -rl), rl)
        dtheta = min(max(dtheta, -rl), rl)
    dthrust = (cmd[0] - thrust) / c.motor_tau if c.motor_tau > 0 else 0.0
    return [u, v, w, ax, ay, az, dphi, dtheta, dthrust]


def plant_derivative(ps: PlantState, cmd: ControlInput, wind: Vec3, cfg: PlantConfig) -> NDArray[np.float64]:
    """Time derivative of the packed plant state ``[p, v, phi, theta, T]``.

    ``wind`` is the total air velocity in the inertial frame [m/s].
    """
    w = tuple(float(c) for c in wind)
    return np.array(_deriv(ps.pack(), tuple(map(float, cmd)), w, _consts(cfg)))


def _rk4(s: list[float], cmd: tuple[float, float, float], wind: tuple[float, float, float], c: _Consts, dt: float) -> list[float]:
    h2 = 0.5 * dt
    k1 = _deriv(s, cmd, wind, c)
    k2 = _deriv([a + h2 * b for a, b in zip(s, k1)], cmd, wind, c)
    k3 = _deriv([a + h2 * b for a, b in zip(s, k2)], cmd, wind, c)
    k4 = _deriv([a + dt * b for a, b in zip(s, k3)], cmd, wind, c)
    h6 = dt / 6.0
    return [a + h6 * (b1 + 2.0 * b2 + 2.0 * b3 + b4) for a, b1, b2, b3, b4 in zip(s, k1, k2, k3, k4)]


def _advance_gust(gust: Vec3, wind: WindField, dt: float, rng: np.random.Generator | None) -> Vec3:
    if wind.mode != "gusty" or wind.gust_sigma == 0.0:
        return gust
    if rng is None:
        raise ValueError("gusty wind needs a random generator")
    decay = math.exp(-dt / wind.gust_corr_time)
    scale = wind.gust_sigma * math.sqrt(1.0 - decay * decay)
    return decay * gust + scale * rng.standard_normal(3)


def wind_velocity(wind: WindField, gust: Vec3) -> Vec3:
    """Total inertial air velocity for the current gust state."""
    if wind.mode == "none":
        return np.zeros(3)
    if wind.mode == "constant":
        return np.array(wind.mean, dtype=np.float64)
    return np.array(wind.mean, dtype=np.float64) + gust


def step_rk4(
    ps: PlantState,
    cmd: ControlInput,
    cfg: PlantConfig,
    wind: WindField,
    dt: float | None = None,
    rng: np.random.Generator | None = None,
) -> PlantState:
    """Advance the plant one classical RK4 step with zero-order-hold inputs.

    The wind (mean + current gust) is frozen over the step; the gust state is
    then advanced by a discrete Ornstein-Uhlenbeck update drawn from ``rng``.
    """
    dt = cfg.dt_sim if dt is None else dt
    c = _consts(cfg)
    s = ps.pack()
    u = (float(cmd[0]), float(cmd[1]), float(cmd[2]))
    if c.motor_tau <= 0:
        s[8] = u[0]
    w = tuple(wind_velocity(wind, ps.wind_gust_state).tolist())
    s_next = _rk4(s, u, w, c, dt)
    gust = _advance_gust(ps.wind_gust_state, wind, dt, rng)
    return PlantState.unpack(s_next, gust)


def measure(ps: PlantState, cfg: PlantConfig, rng: np.random.Generator | None) -> PoseMeasurement:
    """Pose with additive Gaussian noise; exact when both sigmas are zero."""
    p = ps.state.p.copy()
    att = ps.state.att
    if cfg.noise_pos_sigma > 0:
        p = p + cfg.noise_pos_sigma * rng.standard_normal(3)
    if cfg.noise_att_sigma > 0:
        n = cfg.noise_att_sigma * rng.standard_normal(2)
        att = EulerAttitude(att.phi + n[0], att.theta + n[1], att.psi)
    return PoseMeasurement(p, att)


class Plant:
    """Stateful simulator: owns the truth state, the gust state and the RNG streams.

    Gust and measurement noise draw from independent child streams of
    ``cfg.rng_seed`` so enabling one never perturbs the other.
    """

    def __init__(self, cfg: PlantConfig, wind: WindField | None = None, initial: PlantState | None = None) -> None:
        self.cfg = cfg
        self.wind = wind or WindField()
        gust_seq, noise_seq = np.random.SeedSequence(cfg.rng_seed).spawn(2)
        self._gust_rng = np.random.Generator(np.random.PCG64(gust_seq))
        self._noise_rng = np.random.Generator(np.random.PCG64(noise_seq))
        self._c = _consts(cfg)
        initial = initial or PlantState.hover(cfg.params)
        self._s = initial.pack()
        self._gust = np.array(initial.wind_gust_state, dtype=np.float64)
        self.t = 0.0

    @property
    def state(self) -> PlantState:
        return PlantState.unpack(self._s, self._gust)

    @property
    def raw(self) -> list[float]:
        """Packed truth state (read-only copy)."""
        return list(self._s)

    def current_wind(self) -> Vec3:
        return wind_velocity(self.wind, self._gust)

    def step(self, cmd: ControlInput, n: int = 1) -> None:
        """Advance ``n`` steps of ``dt_sim`` holding ``cmd``."""
        u = (float(cmd[0]), float(cmd[1]), float(cmd[2]))
        dt = self.cfg.dt_sim
        c = self._c
        s = self._s
        for _ in range(n):
            if c.motor_tau <= 0:
                s[8] = u[0]
            w = tuple(wind_velocity(self.wind, self._gust).tolist())
            s = _rk4(s, u, w, c, dt)
            self._gust = _advance_gust(self._gust, self.wind, dt, self._gust_rng)
            self.t += dt
        if s[8] < 0.0:
            s[8] = 0.0
        if not all(math.isfinite(a) for a in s):
            raise FloatingPointError(f"plant state diverged at t={self.t:.3f}")
        self._s = s

    def measure(self) -> PoseMeasurement:
        return measure(self.state, self.cfg, self._noise_rng)
