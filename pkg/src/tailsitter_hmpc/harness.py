"""Closed-loop experiments, data collection, metrics and benchmark suites."""

from __future__ import annotations

import json
import logging
import math
import time
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
from numpy.typing import NDArray

from .baselines import BaselineGains, PidController, TrackingError, backstepping_cmd, sliding_mode_cmd
from .core import ControlInput, EulerAttitude, UavState, VehicleParams
from .data import RawLog
from .mpc import MpcConfig, MpcController, PredictionModel, ResidualModel
from .plant import Plant, PlantConfig, PlantState, PoseMeasurement, WindField
from .trajectories import (
    CircleSpec,
    RefPoint,
    Segment,
    Trajectory,
    circle_ref,
    excitation_program,
    hover_ref,
    lemniscate_ref,
    preview,
    step_ref,
)

log = logging.getLogger(__name__)

CONTROLLERS = ("pid", "backstepping", "sliding_mode", "nmpc", "hmpc")
RUN_COLUMNS = (
    "t", "x", "y", "z", "u", "v", "w", "phi", "theta", "x_d", "y_d", "z_d",
    "T_cmd", "phi_cmd", "theta_cmd", "wind_x", "wind_y", "wind_z", "solve_ms", "status",
)  # fmt: skip
DIVERGENCE_RADIUS = 100.0


class SimulationDiverged(RuntimeError):
    pass


# --- configuration ----------------------------------------------------------------


@dataclass(frozen=True)
class TrajectorySpec:
    """``kind`` in ``hover | step | circle | lemniscate``."""

    kind: str = "hover"
    step_size: float = 2.0
    step_axis: int = 0
    t_step: float = 5.0
    circle: CircleSpec = field(default_factory=CircleSpec)

    def __post_init__(self) -> None:
        if self.kind not in ("hover", "step", "circle", "lemniscate"):
            raise ValueError(f"unknown trajectory kind {self.kind!r}")

    def build(self) -> Trajectory:
        if self.kind == "hover":
            return hover_ref
        if self.kind == "step":
            size, axis, ts = self.step_size, self.step_axis, self.t_step
            return lambda t: step_ref(t, size, axis, ts)
        if self.kind == "circle":
            spec = self.circle
            return lambda t: circle_ref(t, spec)
        return lemniscate_ref


DEFAULT_DURATIONS = {"hover": 20.0, "step": 20.0, "circle": 45.0, "lemniscate": 30.0}


@dataclass(frozen=True)
class ExperimentConfig:
    controller: str = "pid"
    plant: PlantConfig = field(default_factory=PlantConfig)
    mpc: MpcConfig = field(default_factory=MpcConfig)
    gains: BaselineGains = field(default_factory=BaselineGains)
    trajectory: TrajectorySpec = field(default_factory=TrajectorySpec)
    wind: WindField = field(default_factory=WindField)
    duration: float = 20.0
    control_rate: float = 100.0
    seed: int = 0
    eval_start: float = 5.0
    # controller-side model: identified time constants and drag
    params: VehicleParams = field(default_factory=VehicleParams)
    model_path: str | None = None
    record_timing: bool = False
    output_csv: str | None = None

    def __post_init__(self) -> None:
        if self.controller not in CONTROLLERS:
            raise ValueError(f"unknown controller {self.controller!r}")
        if self.duration <= 0 or self.control_rate <= 0:
            raise ValueError("duration and control_rate must be positive")


@dataclass
class RunMetrics:
    rmse: tuple[float, float, float]
    max_error: tuple[float, float, float]
    rise_time: float
    settled_max_error: float
    solve_ms_median: float
    solve_ms_max: float
    samples: int

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class RunLog:
    """Per-tick arrays of one closed-loop run (columns of the run CSV)."""

    t: NDArray[np.float64]
    state: NDArray[np.float64]  # (n, 8) truth [p v phi theta]
    p_d: NDArray[np.float64]
    cmd: NDArray[np.float64]
    wind: NDArray[np.float64]
    solve_ms: NDArray[np.float64]
    status: list[str]

    def __len__(self) -> int:
        return self.t.size


# --- state estimation --------------------------------------------------------------


class PoseVelocityEstimator:
    """Alpha-beta filter on measured position with a thrust-model prediction.

    The prediction uses the nominal thrust/gravity acceleration of the last
    command and the measured attitude, so steady accelerations do not lag.
    """

    def __init__(self, params: VehicleParams, dt: float, alpha: float = 0.5, beta: float = 0.2) -> None:
        self.params, self.dt = params, dt
        self.alpha, self.beta = alpha, beta
        self.p: NDArray[np.float64] | None = None
        self.v = np.zeros(3)

    def reset(self, p: NDArray[np.float64], v: NDArray[np.float64]) -> None:
        self.p = np.array(p, dtype=np.float64)
        self.v = np.array(v, dtype=np.float64)

    def update(self, meas: PoseMeasurement, last_cmd: ControlInput) -> UavState:
        if self.p is None:
            self.reset(meas.p, np.zeros(3))
        else:
            phi, theta = meas.att.phi, meas.att.theta
            f = last_cmd.thrust / self.params.m
            a = np.array([
                math.cos(phi) * math.sin(theta) * f,
                -math.sin(phi) * f,
                math.cos(phi) * math.cos(theta) * f - self.params.g,
            ])  # fmt: skip
            dt = self.dt
            p_pred = self.p + self.v * dt + 0.5 * a * dt * dt
            v_pred = self.v + a * dt
            r = meas.p - p_pred
            self.p = p_pred + self.alpha * r
            self.v = v_pred + (self.beta / dt) * r
        return UavState(self.p.copy(), self.v.copy(), meas.att)


# --- controllers --------------------------------------------------------------------

ControllerFn = Callable[[float, UavState, Trajectory], tuple[ControlInput, float, str]]


def make_controller(
    kind: str,
    params: VehicleParams,
    gains: BaselineGains = BaselineGains(),
    mpc_cfg: MpcConfig = MpcConfig(),
    residual: ResidualModel | None = None,
    control_dt: float = 0.01,
    pid_feedforward: bool = False,
) -> ControllerFn:
    """Uniform controller callable returning ``(command, solve_seconds, status)``."""
    if kind == "pid":
        pid = PidController(gains, params, control_dt, feedforward=pid_feedforward)

        def run_pid(t, est, traj):
            ref = traj(t)
            return pid(TrackingError(ref.p_d - est.p, ref.v_d - est.v), ref.a_d, est.att), 0.0, "ok"

        return run_pid
    if kind in ("backstepping", "sliding_mode"):
        law = backstepping_cmd if kind == "backstepping" else sliding_mode_cmd

        def run_law(t, est, traj):
            ref = traj(t)
            return law(TrackingError(ref.p_d - est.p, ref.v_d - est.v), ref.a_d, est.att, gains, params), 0.0, "ok"

        return run_law
    if kind == "nmpc":
        pm = PredictionModel("nonlinear", params)
    elif kind == "hmpc":
        if residual is None:
            raise ValueError("hmpc needs a residual model")
        pm = PredictionModel("hybrid", params, residual)
    else:
        raise ValueError(f"unknown controller {kind!r}")
    ctrl = MpcController(pm, replace(mpc_cfg, control_dt=control_dt))

    def run_mpc(t, est, traj):
        pts = preview(traj, t, ctrl.cfg.N, ctrl.cfg.dt)
        cmd = ctrl.mpc_step(est, pts)
        return cmd, ctrl.solve_times[-1], ctrl.last_status

    return run_mpc


def initial_plant_state(traj: Trajectory, params: VehicleParams) -> PlantState:
    ref = traj(0.0)
    return PlantState.hover(params, ref.p_d, ref.v_d)


# --- closed loop -------------------------------------------------------------------------


def simulate(
    controller: ControllerFn,
    traj: Trajectory,
    plant: Plant,
    duration: float,
    control_rate: float,
    est_params: VehicleParams,
    record_timing: bool = False,
) -> RunLog:
    """Run ``controller`` against ``plant`` at ``control_rate`` for ``duration`` seconds."""
    dt_ctrl = 1.0 / control_rate
    sub = int(round(dt_ctrl / plant.cfg.dt_sim))
    if sub < 1 or abs(sub * plant.cfg.dt_sim - dt_ctrl) > 1e-9:
        raise ValueError("control period must be a multiple of the simulation step")
    n = int(round(duration * control_rate))
    est = PoseVelocityEstimator(est_params, dt_ctrl)
    s0 = plant.state.state
    est.reset(s0.p, s0.v)
    t_arr = np.arange(n) / control_rate
    states = np.empty((n, 8))
    p_d = np.empty((n, 3))
    cmds = np.empty((n, 3))
    winds = np.empty((n, 3))
    solve = np.zeros(n)
    status: list[str] = []
    last_cmd = ControlInput(est_params.m * est_params.g, 0.0, 0.0)
    for k in range(n):
        t = float(t_arr[k])
        raw = plant.raw
        meas = plant.measure()
        xhat = est.update(meas, last_cmd) if k > 0 else UavState(meas.p, s0.v, meas.att)
        cmd, solve_s, st = controller(t, xhat, traj)
        states[k] = raw[:8]
        p_d[k] = traj(t).p_d
        cmds[k] = cmd
        winds[k] = plant.current_wind()
        if record_timing:
            solve[k] = solve_s * 1e3
        status.append(st)
        plant.step(cmd, sub)
        last_cmd = cmd
        if math.sqrt(sum(c * c for c in plant.raw[0:3])) > DIVERGENCE_RADIUS:
            raise SimulationDiverged(f"|p| exceeded {DIVERGENCE_RADIUS} m at t={plant.t:.2f} s")
    return RunLog(t_arr, states, p_d, cmds, winds, solve, status)


def load_residual(path: str | None) -> ResidualModel | None:
    if path is None:
        return None
    from .ffnn import load_model

    return load_model(path)


def run_closed_loop(cfg: ExperimentConfig, residual: ResidualModel | None = None) -> tuple[RunLog, RunMetrics]:
    """Simulate one experiment; writes the run CSV if ``cfg.output_csv`` is set."""
    if cfg.controller == "hmpc" and residual is None:
        if cfg.model_path is None:
            raise ValueError("hmpc run needs a model file")
        residual = load_residual(cfg.model_path)
    traj = cfg.trajectory.build()
    plant_cfg = replace(cfg.plant, rng_seed=cfg.seed)
    plant = Plant(plant_cfg, cfg.wind, initial_plant_state(traj, plant_cfg.params))
    ctrl = make_controller(cfg.controller, cfg.params, cfg.gains, cfg.mpc, residual, 1.0 / cfg.control_rate)
    run = simulate(ctrl, traj, plant, cfg.duration, cfg.control_rate, cfg.params, cfg.record_timing)
    if cfg.output_csv:
        write_run_csv(run, cfg.output_csv)
    return run, compute_rmse(run, cfg.trajectory, cfg.eval_start)


# --- metrics ---------------------------------------------------------------------------


def rise_time(t: NDArray[np.float64], pos: NDArray[np.float64], start: float, size: float, t_step: float) -> float:
    """Time from ``t_step`` until ``pos`` first covers 90 % of the step; NaN if never."""
    if size == 0:
        return math.nan
    progress = (pos - start) / size
    idx = np.flatnonzero((t >= t_step) & (progress >= 0.9))
    return float(t[idx[0]] - t_step) if idx.size else math.nan


def compute_rmse(run: RunLog, spec: TrajectorySpec | None = None, eval_start: float = 5.0, settle: float = 5.0) -> RunMetrics:
    """Per-axis position RMSE and peak error over ``t >= eval_start``.

    For step trajectories also reports the 90 % rise time and the peak error
    norm once ``settle`` seconds have passed after the step.
    """
    win = run.t >= eval_start
    if not np.any(win):
        raise ValueError("evaluation window is empty")
    e = run.state[win, 0:3] - run.p_d[win]
    rmse = np.sqrt(np.mean(e * e, axis=0))
    max_err = np.max(np.abs(e), axis=0)
    rt = math.nan
    settled = math.nan
    if spec is not None and spec.kind == "step":
        ax = spec.step_axis
        before = run.t < spec.t_step
        start = float(run.p_d[before, ax][-1]) if np.any(before) else float(run.p_d[0, ax])
        rt = rise_time(run.t, run.state[:, ax], start, spec.step_size, spec.t_step)
        late = run.t >= spec.t_step + settle
        if np.any(late):
            settled = float(np.max(np.linalg.norm(run.state[late, 0:3] - run.p_d[late], axis=1)))
    solve = run.solve_ms[win]
    return RunMetrics(
        rmse=tuple(float(v) for v in rmse),  # type: ignore[arg-type]
        max_error=tuple(float(v) for v in max_err),  # type: ignore[arg-type]
        rise_time=rt,
        settled_max_error=settled,
        solve_ms_median=float(np.median(solve)),
        solve_ms_max=float(np.max(solve)),
        samples=int(np.sum(win)),
    )


# --- run CSV -------------------------------------------------------------------------------


def write_run_csv(run: RunLog, path: str | Path) -> None:
    lines = [",".join(RUN_COLUMNS)]
    for k in range(len(run)):
        vals = [run.t[k], *run.state[k], *run.p_d[k], *run.cmd[k], *run.wind[k], run.solve_ms[k]]
        lines.append(",".join(repr(float(v)) for v in vals) + "," + run.status[k])
    Path(path).write_text("\n".join(lines) + "\n")


def read_run_csv(path: str | Path) -> RunLog:
    text = Path(path).read_text().splitlines()
    if not text or tuple(text[0].split(",")) != RUN_COLUMNS:
        raise ValueError(f"{path}: not a run log")
    rows = [line.split(",") for line in text[1:] if line]
    num = np.array([[float(v) for v in r[:-1]] for r in rows], dtype=np.float64).reshape(-1, len(RUN_COLUMNS) - 1)
    return RunLog(num[:, 0], num[:, 1:9], num[:, 9:12], num[:, 12:15], num[:, 15:18], num[:, 18], [r[-1] for r in rows])


# --- data collection -------------------------------------------------------------------------


@dataclass(frozen=True)
class CollectConfig:
    plant: PlantConfig = field(default_factory=PlantConfig)
    gains: BaselineGains = field(default_factory=BaselineGains)
    wind: WindField = field(default_factory=WindField)
    seed: int = 0
    reduced: bool = False
    control_rate: float = 100.0
    raw_rate: float | None = None  # e.g. 300 Hz for uneven high-rate logs


def _landing_wrap(traj: Trajectory, t_end: float, landing: float) -> Trajectory:
    end = traj(t_end).p_d
    ground = np.array([end[0], end[1], 0.0])

    def wrapped(t: float) -> RefPoint:
        if t < t_end:
            return traj(t)
        x = min((t - t_end) / landing, 1.0)
        e = x * x * (3.0 - 2.0 * x)
        de = 6.0 * x * (1.0 - x) / landing if x < 1 else 0.0
        dde = (6.0 - 12.0 * x) / landing**2 if x < 1 else 0.0
        d = ground - end
        return RefPoint(end + e * d, de * d, dde * d)

    return wrapped


def fly_segment(seg: Segment, cfg: CollectConfig, seed: int) -> RawLog:
    """Fly one excitation segment under PID (with feedforward) and log pose + commands."""
    params = cfg.plant.params
    plant_cfg = replace(cfg.plant, rng_seed=seed)
    t_rec0 = seg.takeoff
    t_rec1 = seg.takeoff + seg.duration
    traj = _landing_wrap(seg.trajectory, t_rec1, seg.landing)
    plant = Plant(plant_cfg, cfg.wind, PlantState.hover(params, traj(0.0).p_d))
    ctrl = make_controller("pid", params, cfg.gains, control_dt=1.0 / cfg.control_rate, pid_feedforward=True)
    dt_ctrl = 1.0 / cfg.control_rate
    sub = int(round(dt_ctrl / plant_cfg.dt_sim))
    n = int(round((t_rec1 + seg.landing) * cfg.control_rate))
    est = PoseVelocityEstimator(params, dt_ctrl)
    est.reset(plant.state.state.p, np.zeros(3))
    rows_t, rows_p, rows_att, rows_cmd = [], [], [], []
    raw_dt = None if cfg.raw_rate is None else 1.0 / cfg.raw_rate
    next_raw = t_rec0
    last_cmd = ControlInput(params.m * params.g, 0.0, 0.0)
    for k in range(n):
        t = k * dt_ctrl
        meas = plant.measure()
        xhat = est.update(meas, last_cmd)
        cmd, _, _ = ctrl(t, xhat, traj)
        in_window = t_rec0 - 1e-9 <= t < t_rec1 - 1e-9
        if raw_dt is None:
            if in_window:
                rows_t.append(t - t_rec0)
                rows_p.append(meas.p)
                rows_att.append(meas.att)
                rows_cmd.append(cmd)
            plant.step(cmd, sub)
        else:
            # high-rate logging at sim-step resolution; spacing is uneven
            for _ in range(sub):
                ts = plant.t
                if in_window and ts >= next_raw - 1e-12:
                    m = plant.measure() if ts > t + 1e-12 else meas
                    rows_t.append(ts - t_rec0)
                    rows_p.append(m.p)
                    rows_att.append(m.att)
                    rows_cmd.append(cmd)
                    next_raw += raw_dt
                plant.step(cmd, 1)
        last_cmd = cmd
        if math.sqrt(sum(c * c for c in plant.raw[0:3])) > DIVERGENCE_RADIUS:
            raise SimulationDiverged(f"segment {seg.name} diverged at t={plant.t:.2f} s")
    return RawLog(
        np.array(rows_t), np.array(rows_p), np.array([tuple(a) for a in rows_att]), np.array([tuple(c) for c in rows_cmd]), seg.name
    )


def collect_data(cfg: CollectConfig = CollectConfig(), segments: Sequence[Segment] | None = None) -> list[RawLog]:
    """Fly the seeded excitation program; one log per segment."""
    segs = list(segments) if segments is not None else excitation_program(seed=cfg.seed, reduced=cfg.reduced)
    seeds = np.random.SeedSequence(cfg.seed).generate_state(len(segs))
    logs = []
    for seg, s in zip(segs, seeds):
        logs.append(fly_segment(seg, cfg, int(s)))
        log.info("collected %s (%d rows)", seg.name, len(logs[-1]))
    return logs


# --- suites --------------------------------------------------------------------------------

SUITE_CONTROLLERS = ("pid", "backstepping", "sliding_mode", "nmpc", "hmpc", "hmpc_star")
SUITE_TRAJECTORIES = ("step", "circle", "lemniscate")
SUITE_WINDS = {"no_wind": WindField(), "wind_x3": WindField.constant(3.0, 0.0, 0.0)}


def _cell_seed(seed: int, i: int) -> int:
    return int(np.random.SeedSequence([seed, i]).generate_state(1)[0])


def benchmark_suite(
    params: VehicleParams,
    residuals: dict[str, ResidualModel | None],
    out_dir: str | Path,
    seed: int = 0,
    controllers: Sequence[str] = SUITE_CONTROLLERS,
    trajectories: Sequence[str] = SUITE_TRAJECTORIES,
    winds: dict[str, WindField] | None = None,
    plant: PlantConfig = PlantConfig(),
    mpc: MpcConfig = MpcConfig(),
    gains: BaselineGains = BaselineGains(),
    durations: dict[str, float] | None = None,
    record_timing: bool = False,
) -> dict:
    """Controller x trajectory x wind matrix; writes one CSV per cell plus ``summary.json``.

    ``residuals`` maps ``"hmpc"`` / ``"hmpc_star"`` to their learned models;
    a missing entry turns that row into an error entry.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    winds = SUITE_WINDS if winds is None else winds
    durations = {**DEFAULT_DURATIONS, **(durations or {})}
    cells = []
    timing: dict[str, float] = {}
    i = 0
    for wname, wind in winds.items():
        for tname in trajectories:
            for cname in controllers:
                i += 1
                name = f"{cname}__{tname}__{wname}"
                kind = "hmpc" if cname.startswith("hmpc") else cname
                entry: dict = {"controller": cname, "trajectory": tname, "wind": wname, "csv": f"{name}.csv"}
                residual = residuals.get(cname) if kind == "hmpc" else None
                if kind == "hmpc" and residual is None:
                    entry["error"] = "missing model"
                    cells.append(entry)
                    continue
                cfg = ExperimentConfig(
                    controller=kind, plant=plant, mpc=mpc, gains=gains,
                    trajectory=TrajectorySpec(tname), wind=wind, duration=durations[tname],
                    seed=_cell_seed(seed, i), params=params, record_timing=record_timing,
                    output_csv=str(out / f"{name}.csv"),
                )  # fmt: skip
                t0 = time.perf_counter()
                try:
                    _, metrics = run_closed_loop(cfg, residual)
                    entry["metrics"] = metrics.to_dict()
                except SimulationDiverged as exc:
                    entry["error"] = f"diverged: {exc}"
                timing[name] = time.perf_counter() - t0
                cells.append(entry)
                log.info("%s done", name)
    report = {"seed": seed, "cells": cells, "reductions": _reductions(cells)}
    (out / "summary.json").write_text(json.dumps(report, indent=1, sort_keys=True, default=_json_default))
    _write_table(cells, out / "summary.csv")
    if record_timing:
        (out / "timing.json").write_text(json.dumps(timing, indent=1, sort_keys=True))
    return report


def _json_default(o):
    raise TypeError(f"cannot serialise {type(o)}")


def _reductions(cells: list[dict]) -> dict:
    """Per trajectory/wind: relative RMSE reduction of each MPC variant against NMPC (%)."""
    out: dict = {}
    index = {(c["controller"], c["trajectory"], c["wind"]): c for c in cells if "metrics" in c}
    for (ctrl, traj, wind), cell in sorted(index.items()):
        base = index.get(("nmpc", traj, wind))
        if ctrl == "nmpc" or base is None:
            continue
        red = [
            100.0 * (1.0 - a / b) if b > 0 else math.nan
            for a, b in zip(cell["metrics"]["rmse"], base["metrics"]["rmse"])
        ]
        out[f"{ctrl}_vs_nmpc__{traj}__{wind}"] = red
    return out


def _write_table(cells: list[dict], path: Path) -> None:
    head = "controller,trajectory,wind,rmse_x,rmse_y,rmse_z,max_err_x,max_err_y,max_err_z,rise_time,solve_ms_median,solve_ms_max,samples,error"
    lines = [head]
    for c in cells:
        m = c.get("metrics")
        if m is None:
            lines.append(f"{c['controller']},{c['trajectory']},{c['wind']},,,,,,,,,,,{c.get('error', '')}")
            continue
        vals = [*m["rmse"], *m["max_error"], m["rise_time"], m["solve_ms_median"], m["solve_ms_max"]]
        lines.append(
            f"{c['controller']},{c['trajectory']},{c['wind']}," + ",".join(repr(float(v)) for v in vals) + f",{m['samples']},"
        )
    path.write_text("\n".join(lines) + "\n")


def benchmark_solver(
    models: dict[str, ResidualModel | None],
    params: VehicleParams,
    n_solves: int = 1000,
    mpc: MpcConfig = MpcConfig(),
    seed: int = 0,
) -> dict[str, dict[str, float]]:
    """Median/max wall-clock OCP solve time per prediction model in the hover regime.

    ``models`` maps a label to a residual model, or to ``None`` for the
    nonlinear (drag) model. States are small random perturbations of hover
    so the warm-started controller does real work each call.
    """
    rng = np.random.default_rng(seed)
    hover = np.array([0.0, 0.0, 1.2])
    pts = preview(lambda t: hover_ref(t, tuple(hover)), 0.0, mpc.N, mpc.dt)
    perturb = rng.normal(scale=[0.05, 0.05, 0.05, 0.1, 0.1, 0.1, 0.02, 0.02], size=(n_solves, 8))
    table = {}
    for label, residual in models.items():
        pm = PredictionModel("nonlinear", params) if residual is None else PredictionModel("hybrid", params, residual)
        ctrl = MpcController(pm, mpc)
        for k in range(n_solves):
            x = perturb[k].copy()
            x[0:3] += hover
            ctrl.mpc_step(UavState.from_mpc_state(x), pts)
        times = np.array(ctrl.solve_times) * 1e3
        table[label] = {"median_ms": float(np.median(times)), "max_ms": float(np.max(times)), "solves": n_solves}
    return table


# --- end-to-end model preparation -------------------------------------------------------------


@dataclass(frozen=True)
class SuiteConfig:
    """Settings shared by every cell of the comparison suite.

    The tilt limit is wider than the single-run default because the
    figure-eight reference alone needs about 0.76 rad of tilt.
    """

    plant: PlantConfig = field(default_factory=PlantConfig)
    mpc: MpcConfig = field(default_factory=lambda: MpcConfig(angle_max=0.8))
    gains: BaselineGains = field(default_factory=lambda: BaselineGains(angle_max=0.8))
    hidden: int = 10
    window: int = 15


@dataclass
class PreparedModels:
    params: VehicleParams
    residuals: dict[str, ResidualModel | None]
    reports: dict[str, dict]


def identify_params(logs: Sequence[RawLog], dataset, base: VehicleParams, window: int = 15) -> VehicleParams:
    """Controller-side model: identified attitude time constants and quadratic drag."""
    from .data import identify_attitude_taus, identify_drag_coeffs

    tau_phi, tau_theta = identify_attitude_taus(logs, window)
    c_dx, c_dy, c_dz = identify_drag_coeffs(dataset)
    return replace(base, tau_phi=tau_phi, tau_theta=tau_theta, c_dx=c_dx, c_dy=c_dy, c_dz=c_dz)


def pipeline_seeds(seed: int) -> tuple[int, int, int, int]:
    """Independent streams for (full collection, reduced collection, split, training)."""
    a, b, c, d = (int(v) for v in np.random.SeedSequence(seed).generate_state(4))
    return a, b, c, d


def prepare_models(seed: int, cfg: SuiteConfig = SuiteConfig(), workdir: str | Path | None = None) -> PreparedModels:
    """Collect the full and reduced-envelope programs, identify, and train both networks.

    Every random stream derives from ``seed``. With ``workdir`` the datasets,
    models and identified parameters are written there as well.
    """
    from .config import dump_json
    from .data import build_dataset, write_dataset
    from .ffnn import TrainConfig, save_model, train_lm

    s_full, s_red, s_split, s_train = pipeline_seeds(seed)
    plant = cfg.plant
    base = replace(plant.params, c_dx=0.0, c_dy=0.0, c_dz=0.0)
    logs = collect_data(CollectConfig(plant=plant, gains=cfg.gains, seed=s_full))
    ds = build_dataset(logs, base, cfg.window, seed=s_split)
    params = identify_params(logs, ds, base, cfg.window)
    logs_r = collect_data(CollectConfig(plant=plant, gains=cfg.gains, seed=s_red, reduced=True))
    ds_r = build_dataset(logs_r, base, cfg.window, seed=s_split)
    model, rep = train_lm(ds, cfg.hidden, TrainConfig(seed=s_train))
    model_r, rep_r = train_lm(ds_r, cfg.hidden, TrainConfig(seed=s_train))
    if workdir is not None:
        wd = Path(workdir)
        wd.mkdir(parents=True, exist_ok=True)
        write_dataset(ds, wd / "dataset.csv")
        write_dataset(ds_r, wd / "dataset_reduced.csv")
        save_model(model, wd / "model.json")
        save_model(model_r, wd / "model_reduced.json")
        dump_json(params, wd / "params.json")
    return PreparedModels(params, {"hmpc": model, "hmpc_star": model_r}, {"hmpc": rep.to_dict(), "hmpc_star": rep_r.to_dict()})
