"""Receding-horizon position controller.

Prediction models share the translational Newton-Euler rows and first-order
attitude rows; they differ in the extra acceleration term::

    nonlinear:  a_extra = c_d * v |v|                 (identified drag)
    hybrid:     a_extra = residual([u v w phi theta T]) (learned, e.g. an MLP)

The optimal control problem uses multiple shooting with one RK4 step per
stage. Each SQP iteration linearises the stage integrators (with analytic
sensitivities), condenses the shooting states away into a dense QP over the
``3 N`` input increments and solves it with the active-set method in
:mod:`.qp`. By default one iteration runs per control tick (real-time
iteration) from the shifted previous solution.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Callable, Protocol, Sequence

import numpy as np
from numpy.typing import NDArray

from .core import ControlInput, UavState, VehicleParams
from .qp import QpError, qp_solve
from .trajectories import RefPoint

NX = 8
NU = 3


class ResidualModel(Protocol):
    """Batched residual acceleration and its input Jacobian.

    ``x`` has shape ``(M, 6)`` with columns ``[u v w phi theta T]``; returns
    ``(M, 3)`` accelerations and ``(M, 3, 6)`` Jacobians.
    """

    def predict_with_jacobian(self, x: NDArray[np.float64]) -> tuple[NDArray[np.float64], NDArray[np.float64]]: ...


@dataclass(frozen=True)
class DragResidual:
    """``c_d * v |v|`` written as a residual model (inertial axes)."""

    c_d: tuple[float, float, float]

    def predict_with_jacobian(self, x):
        v = x[:, 0:3]
        c = np.asarray(self.c_d)
        J = np.zeros((x.shape[0], 3, 6))
        idx = np.arange(3)
        J[:, idx, idx] = 2.0 * c * np.abs(v)
        return c * v * np.abs(v), J


class FunctionResidual:
    """Wraps a plain ``f(x (6,)) -> (3,)`` function; Jacobian by central differences.

    Meant for oracle studies (e.g. feeding the exact truth residual to the
    hybrid controller), not for speed.
    """

    def __init__(self, fn: Callable[[NDArray[np.float64]], NDArray[np.float64]], h: float = 1e-6) -> None:
        self.fn = fn
        self.h = h

    def predict_with_jacobian(self, x):
        M = x.shape[0]
        y = np.array([self.fn(row) for row in x])
        J = np.zeros((M, 3, 6))
        for j in range(6):
            e = np.zeros(6)
            e[j] = self.h
            J[:, :, j] = np.array([(self.fn(row + e) - self.fn(row - e)) / (2 * self.h) for row in x])
        return y, J


@dataclass
class PredictionModel:
    """``variant`` is ``"nonlinear"`` (drag from ``params.c_d*``) or ``"hybrid"`` (needs ``model``)."""

    variant: str
    params: VehicleParams
    model: ResidualModel | None = None

    def __post_init__(self) -> None:
        if self.variant not in ("nonlinear", "hybrid"):
            raise ValueError(f"unknown prediction model variant {self.variant!r}")
        if self.variant == "hybrid" and self.model is None:
            raise ValueError("hybrid prediction model needs a residual model")

    def _extra(self, x: NDArray[np.float64], u: NDArray[np.float64]):
        if self.variant == "nonlinear":
            p = self.params
            return DragResidual((p.c_dx, p.c_dy, p.c_dz)).predict_with_jacobian(x[:, 3:6])
        feats = np.concatenate([x[:, 3:8], u[:, 0:1]], axis=1)
        return self.model.predict_with_jacobian(feats)  # type: ignore[union-attr]


def _derivative_batch(pm: PredictionModel, x, u, with_jac: bool):
    p = pm.params
    M = x.shape[0]
    phi, theta = x[:, 6], x[:, 7]
    T = u[:, 0]
    cf, sf, ct, st = np.cos(phi), np.sin(phi), np.cos(theta), np.sin(theta)
    a_extra, J_extra = pm._extra(x, u)
    fT = T / p.m
    dx = np.empty((M, NX))
    dx[:, 0:3] = x[:, 3:6]
    dx[:, 3] = cf * st * fT + a_extra[:, 0]
    dx[:, 4] = -sf * fT + a_extra[:, 1]
    dx[:, 5] = -p.g + cf * ct * fT + a_extra[:, 2]
    dx[:, 6] = (u[:, 1] - phi) / p.tau_phi
    dx[:, 7] = (u[:, 2] - theta) / p.tau_theta
    if not with_jac:
        return dx, None, None
    A = np.zeros((M, NX, NX))
    B = np.zeros((M, NX, NU))
    A[:, 0, 3] = A[:, 1, 4] = A[:, 2, 5] = 1.0
    A[:, 3, 6] = -sf * st * fT
    A[:, 3, 7] = cf * ct * fT
    A[:, 4, 6] = -cf * fT
    A[:, 5, 6] = -sf * ct * fT
    A[:, 5, 7] = -cf * st * fT
    B[:, 3, 0] = cf * st / p.m
    B[:, 4, 0] = -sf / p.m
    B[:, 5, 0] = cf * ct / p.m
    A[:, 3:6, 3:8] += J_extra[:, :, 0:5]
    B[:, 3:6, 0] += J_extra[:, :, 5]
    A[:, 6, 6] = -1.0 / p.tau_phi
    A[:, 7, 7] = -1.0 / p.tau_theta
    B[:, 6, 1] = 1.0 / p.tau_phi
    B[:, 7, 2] = 1.0 / p.tau_theta
    return dx, A, B


def model_derivative(pm: PredictionModel, x, u) -> NDArray[np.float64]:
    """Continuous-time ``x_dot`` for one state (8,) and input (3,)."""
    x2 = np.asarray(x, dtype=np.float64).reshape(1, NX)
    u2 = np.asarray(u, dtype=np.float64).reshape(1, NU)
    return _derivative_batch(pm, x2, u2, False)[0][0]


def model_jacobians(pm: PredictionModel, x, u) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    """Analytic ``(df/dx (8x8), df/du (8x3))``."""
    x2 = np.asarray(x, dtype=np.float64).reshape(1, NX)
    u2 = np.asarray(u, dtype=np.float64).reshape(1, NU)
    _, A, B = _derivative_batch(pm, x2, u2, True)
    return A[0], B[0]


def rk4_stages(pm: PredictionModel, x, u, h: float, with_sens: bool = True):
    """One RK4 step per row of ``x (M, 8)``, ``u (M, 3)``, with sensitivities.

    Returns ``(x_next, Ad, Bd)`` where ``Ad = dx_next/dx`` and
    ``Bd = dx_next/du`` are propagated through the four stages exactly.
    """
    k1, A1, B1 = _derivative_batch(pm, x, u, with_sens)
    k2, A2, B2 = _derivative_batch(pm, x + 0.5 * h * k1, u, with_sens)
    k3, A3, B3 = _derivative_batch(pm, x + 0.5 * h * k2, u, with_sens)
    k4, A4, B4 = _derivative_batch(pm, x + h * k3, u, with_sens)
    x_next = x + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    if not with_sens:
        return x_next, None, None
    eye = np.eye(NX)
    K1x, K1u = A1, B1
    K2x = A2 @ (eye + 0.5 * h * K1x)
    K2u = A2 @ (0.5 * h * K1u) + B2
    K3x = A3 @ (eye + 0.5 * h * K2x)
    K3u = A3 @ (0.5 * h * K2u) + B3
    K4x = A4 @ (eye + h * K3x)
    K4u = A4 @ (h * K3u) + B4
    Ad = eye + h / 6.0 * (K1x + 2.0 * K2x + 2.0 * K3x + K4x)
    Bd = h / 6.0 * (K1u + 2.0 * K2u + 2.0 * K3u + K4u)
    return x_next, Ad, Bd


def shoot(pm: PredictionModel, x0, u_seq, dt: float, N: int | None = None, substeps: int = 1) -> NDArray[np.float64]:
    """Single-shooting rollout with zero-order-hold inputs; ``(N+1, 8)``."""
    u_seq = np.asarray(u_seq, dtype=np.float64).reshape(-1, NU)
    N = u_seq.shape[0] if N is None else N
    if u_seq.shape[0] < N:
        raise ValueError("input sequence shorter than horizon")
    out = np.empty((N + 1, NX))
    out[0] = np.asarray(x0, dtype=np.float64)
    h = dt / substeps
    for k in range(N):
        x = out[k : k + 1]
        for _ in range(substeps):
            x = rk4_stages(pm, x, u_seq[k : k + 1], h, with_sens=False)[0]
        if not np.all(np.isfinite(x)):
            raise FloatingPointError(f"prediction diverged at stage {k + 1}")
        out[k + 1] = x[0]
    return out


# --- OCP ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MpcWeights:
    Q: tuple[float, ...] = (12, 12, 12, 3, 3, 3, 1, 1, 400, 30, 30)
    Q_N: tuple[float, ...] = (12, 12, 12, 3, 3, 3, 1, 1)

    def __post_init__(self) -> None:
        if len(self.Q) != NX + NU or len(self.Q_N) != NX:
            raise ValueError("Q needs 11 and Q_N 8 diagonal weights")
        if min(self.Q) < 0 or min(self.Q_N) < 0:
            raise ValueError("weights must be non-negative")


@dataclass(frozen=True)
class MpcConfig:
    N: int = 20
    dt: float = 0.05
    weights: MpcWeights = field(default_factory=MpcWeights)
    T_min: float | None = None  # default 0.1 m g
    T_max: float | None = None  # default 2 m g
    angle_max: float = 0.6
    sqp_iters: int = 1
    kkt_tol: float = 1e-8
    regularization: float = 1e-8
    control_dt: float = 0.01
    # attitude/input references from the reference acceleration (else hover)
    feedforward: bool = True
    model_feedforward: bool = True
    # the thrust weight applies to T / thrust_scale; None means the upper thrust bound
    thrust_scale: float | None = None

    def __post_init__(self) -> None:
        if self.N < 1 or self.dt <= 0:
            raise ValueError("need N >= 1 and dt > 0")
        if self.T_min is not None and self.T_min < 0:
            raise ValueError("T_min must be non-negative")
        if self.sqp_iters < 1:
            raise ValueError("sqp_iters must be >= 1")

    def bounds(self, params: VehicleParams) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
        mg = params.m * params.g
        lo = 0.1 * mg if self.T_min is None else self.T_min
        hi = 2.0 * mg if self.T_max is None else self.T_max
        a = self.angle_max
        return np.array([lo, -a, -a]), np.array([hi, a, a])

    def input_weights(self, params: VehicleParams) -> NDArray[np.float64]:
        s = self.bounds(params)[1][0] if self.thrust_scale is None else self.thrust_scale
        q = np.asarray(self.weights.Q[NX:], dtype=np.float64)
        return q * np.array([1.0 / (s * s), 1.0, 1.0])


@dataclass
class ReferenceWindow:
    """Stage references ``y_ref (N, 11)`` over ``[state | input]`` and terminal ``y_N (8,)``."""

    y_ref: NDArray[np.float64]
    y_N: NDArray[np.float64]

    def __post_init__(self) -> None:
        self.y_ref = np.asarray(self.y_ref, dtype=np.float64)
        self.y_N = np.asarray(self.y_N, dtype=np.float64).reshape(NX)
        if self.y_ref.ndim != 2 or self.y_ref.shape[1] != NX + NU:
            raise ValueError("y_ref must have shape (N, 11)")
        if not (np.all(np.isfinite(self.y_ref)) and np.all(np.isfinite(self.y_N))):
            raise ValueError("non-finite reference")

    @classmethod
    def from_preview(
        cls,
        points: Sequence[RefPoint],
        params: VehicleParams,
        feedforward: bool = True,
        pm: PredictionModel | None = None,
        iterations: int = 3,
        dt: float | None = None,
    ) -> ReferenceWindow:
        """Stage references from a trajectory preview.

        Position and velocity come from the preview. With ``feedforward`` the
        attitude and input references are the thrust-vector inversion of the
        reference acceleration; when ``pm`` is given the model's extra
        acceleration (drag or learned residual) is compensated by a few
        fixed-point passes, so each model is asked for the inputs it believes
        keep it on the reference. Without ``feedforward`` they are level
        attitude and hover thrust. All variants coincide for a hover preview
        of a model with zero residual at rest. Given the preview spacing
        ``dt``, the attitude-command references lead the attitude references
        by ``tau * d(angle)/dt`` so they invert the first-order attitude lag.
        """
        N = len(points) - 1
        pos = np.array([pt.p_d for pt in points], dtype=np.float64)
        vel = np.array([pt.v_d for pt in points], dtype=np.float64)
        acc = np.array([pt.a_d for pt in points], dtype=np.float64)
        inputs = np.zeros((N + 1, NU))
        inputs[:, 0] = params.m * params.g
        if feedforward:
            inputs = thrust_feedforward_batch(acc, params)
            if pm is not None:
                for _ in range(iterations):
                    x = np.concatenate([pos, vel, inputs[:, 1:3]], axis=1)
                    extra, _ = pm._extra(x, inputs)
                    inputs = thrust_feedforward_batch(acc - extra, params)
        y = np.zeros((N, NX + NU))
        y[:, 0:3], y[:, 3:6], y[:, 6:8] = pos[:N], vel[:N], inputs[:N, 1:3]
        y[:, NX:] = inputs[:N]
        if feedforward and dt is not None and N >= 2:
            rates = np.gradient(inputs[:, 1:3], dt, axis=0)
            y[:, NX + 1] += params.tau_phi * rates[:N, 0]
            y[:, NX + 2] += params.tau_theta * rates[:N, 1]
        yN = np.concatenate([pos[N], vel[N], inputs[N, 1:3]])
        return cls(y, yN)

    @classmethod
    def hover(cls, state: NDArray[np.float64], N: int, params: VehicleParams) -> ReferenceWindow:
        y = np.zeros((N, NX + NU))
        y[:, 0:NX] = state
        y[:, NX] = params.m * params.g
        return cls(y, np.array(state, dtype=np.float64))


def thrust_feedforward_batch(a_d: NDArray[np.float64], params: VehicleParams) -> NDArray[np.float64]:
    """Rows ``(T, phi, theta)`` producing accelerations ``a_d (M, 3)`` with thrust and gravity (zero yaw)."""
    f = np.array(a_d, dtype=np.float64).reshape(-1, 3)
    f[:, 2] += params.g
    norm = np.linalg.norm(f, axis=1)
    safe = np.where(norm > 1e-9, norm, 1.0)
    phi = np.arcsin(np.clip(-f[:, 1] / safe, -1.0, 1.0))
    theta = np.arctan2(f[:, 0], f[:, 2])
    return np.column_stack([params.m * norm, phi, theta])


def thrust_feedforward(a_d, params: VehicleParams) -> tuple[float, float, float]:
    T, phi, theta = thrust_feedforward_batch(np.asarray(a_d, dtype=np.float64).reshape(1, 3), params)[0]
    return float(T), float(phi), float(theta)


@dataclass
class OcpSolution:
    states: NDArray[np.float64]
    inputs: NDArray[np.float64]
    kkt_residual: float
    qp_iterations: int
    solve_time: float
    status: str  # "solved" | "max_iter" | "failed"
    active_set: NDArray[np.int8] | None = None

    @property
    def command(self) -> ControlInput:
        u = self.inputs[0]
        return ControlInput(float(u[0]), float(u[1]), float(u[2]))


def defects(pm: PredictionModel, states, inputs, dt: float) -> NDArray[np.float64]:
    """Multiple-shooting continuity gaps ``F(x_k, u_k) - x_{k+1}``, shape ``(N, 8)``."""
    x_next = rk4_stages(pm, states[:-1], inputs, dt, with_sens=False)[0]
    return x_next - states[1:]


def solve_ocp(
    pm: PredictionModel,
    x_now,
    ref: ReferenceWindow,
    cfg: MpcConfig,
    warm_start: OcpSolution | None = None,
) -> OcpSolution:
    """Gauss-Newton SQP on the multiple-shooting problem.

    Cost ``sum_k |[x_k; u_k] - y_ref_k|^2_Q + |x_N - y_N|^2_{Q_N}``. The
    initial state is embedded by fixing ``x_0 = x_now``; the shooting nodes
    and inputs are initialised from ``warm_start`` (or held at ``x_now`` and
    the reference input). Every iteration takes a full step.
    """
    t0 = time.perf_counter()
    x_now = np.asarray(x_now, dtype=np.float64).reshape(NX)
    if not np.all(np.isfinite(x_now)):
        raise ValueError("non-finite initial state")
    N, h = cfg.N, cfg.dt
    if ref.y_ref.shape[0] != N:
        raise ValueError(f"reference window has {ref.y_ref.shape[0]} stages, expected {N}")
    lb_u, ub_u = cfg.bounds(pm.params)
    lb_all, ub_all = np.tile(lb_u, N), np.tile(ub_u, N)
    q = np.asarray(cfg.weights.Q, dtype=np.float64)
    qx, qu = q[:NX], cfg.input_weights(pm.params)
    qN = np.asarray(cfg.weights.Q_N, dtype=np.float64)
    q_stack = np.concatenate([np.tile(qx, N - 1), qN])  # weights on x_1 .. x_N
    xref_stack = np.concatenate([ref.y_ref[1:, :NX].ravel(), ref.y_N])
    uref = ref.y_ref[:, NX:]

    if warm_start is not None and warm_start.states.shape == (N + 1, NX):
        xs = warm_start.states.copy()
        us = np.clip(warm_start.inputs, lb_u, ub_u)
        active = warm_start.active_set
    else:
        xs = np.tile(x_now, (N + 1, 1))
        us = np.clip(uref.copy(), lb_u, ub_u)
        active = None
    xs[0] = x_now

    status = "solved"
    kkt = 0.0
    qp_iters = 0
    try:
        for _ in range(cfg.sqp_iters):
            x_next, Ad, Bd = rk4_stages(pm, xs[:-1], us, h)
            d = x_next - xs[1:]
            # condensing: dx_k = G_k du + c_k with dx_0 = 0
            G = np.zeros((N + 1, NX, NU * N))
            c = np.zeros((N + 1, NX))
            for k in range(N):
                G[k + 1] = Ad[k] @ G[k]
                G[k + 1][:, NU * k : NU * (k + 1)] += Bd[k]
                c[k + 1] = Ad[k] @ c[k] + d[k]
            Gs = G[1:].reshape(NX * N, NU * N)
            r = (xs[1:] + c[1:]).ravel() - xref_stack
            Hm = Gs.T @ (q_stack[:, None] * Gs)
            Hm[np.diag_indices_from(Hm)] += np.tile(qu, N) + cfg.regularization
            gv = Gs.T @ (q_stack * r) + np.tile(qu, N) * (us - uref).ravel()
            res = qp_solve(Hm, gv, lb_all - us.ravel(), ub_all - us.ravel(), active, kkt_tol=cfg.kkt_tol)
            active = res.active
            kkt = res.kkt
            qp_iters += res.iterations
            if res.status != "solved" or res.kkt > cfg.kkt_tol:
                status = "max_iter"
            du = res.z.reshape(N, NU)
            us = np.clip(us + du, lb_u, ub_u)
            xs[1:] = xs[1:] + (Gs @ res.z).reshape(N, NX) + c[1:]
        if not (np.all(np.isfinite(xs)) and np.all(np.isfinite(us))):
            raise FloatingPointError("non-finite SQP iterate")
    except (QpError, FloatingPointError, np.linalg.LinAlgError):
        status = "failed"
        us = np.clip(np.nan_to_num(us, nan=0.0), lb_u, ub_u)
        xs = np.nan_to_num(xs)
    return OcpSolution(xs, us, kkt, qp_iters, time.perf_counter() - t0, status, active)


def shift_solution(sol: OcpSolution, fraction: float) -> OcpSolution:
    """Advance a solution by ``fraction`` of a stage, interpolating between nodes."""
    if fraction <= 0:
        return sol
    whole = int(np.floor(fraction))
    frac = fraction - whole

    def sh(a: NDArray[np.float64]) -> NDArray[np.float64]:
        n = a.shape[0]
        idx = np.arange(n) + whole
        i0 = np.minimum(idx, n - 1)
        i1 = np.minimum(idx + 1, n - 1)
        return (1.0 - frac) * a[i0] + frac * a[i1]

    active = sol.active_set
    if active is not None and whole > 0:
        active = np.concatenate([active[NU * whole :], np.tile(active[-NU:], whole)])
    return OcpSolution(sh(sol.states), sh(sol.inputs), sol.kkt_residual, 0, 0.0, sol.status, active)


class MpcController:
    """Stateful receding-horizon controller with warm start and hold-last fallback."""

    def __init__(self, pm: PredictionModel, cfg: MpcConfig = MpcConfig(), shift: float | None = None) -> None:
        self.pm = pm
        self.cfg = cfg
        # warm start advances by one control period unless told otherwise
        self.shift = cfg.control_dt / cfg.dt if shift is None else shift
        self.last: OcpSolution | None = None
        self.last_cmd = ControlInput(pm.params.m * pm.params.g, 0.0, 0.0)
        self.solve_times: list[float] = []
        self.last_status = "init"

    def reset(self) -> None:
        self.last = None
        self.last_cmd = ControlInput(self.pm.params.m * self.pm.params.g, 0.0, 0.0)
        self.solve_times = []

    def mpc_step(self, x_est: UavState, preview_points: Sequence[RefPoint]) -> ControlInput:
        if len(preview_points) != self.cfg.N + 1:
            raise ValueError(f"preview must supply N+1 = {self.cfg.N + 1} points")
        try:
            ref = ReferenceWindow.from_preview(
                preview_points, self.pm.params, self.cfg.feedforward,
                self.pm if self.cfg.model_feedforward else None, dt=self.cfg.dt,
            )
        except ValueError:
            # the model produced a non-finite reference; treat like a failed solve
            self.solve_times.append(0.0)
            self.last_status = "failed"
            self.last = None
            return self.last_cmd
        warm = shift_solution(self.last, self.shift) if self.last is not None and self.last.status != "failed" else None
        sol = solve_ocp(self.pm, x_est.as_mpc_state(), ref, self.cfg, warm)
        self.solve_times.append(sol.solve_time)
        self.last_status = sol.status
        if sol.status == "failed":
            self.last = None
            return self.last_cmd
        self.last = sol
        self.last_cmd = sol.command
        return self.last_cmd
