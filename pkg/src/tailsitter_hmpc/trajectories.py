"""Reference trajectories with analytic derivatives and horizon previews."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np

from .core import Vec3

HOVER_ALTITUDE = 1.2


class RefPoint(NamedTuple):
    p_d: Vec3
    v_d: Vec3
    a_d: Vec3


Trajectory = Callable[[float], RefPoint]


def _point(p, v, a) -> RefPoint:
    return RefPoint(np.asarray(p, dtype=np.float64), np.asarray(v, dtype=np.float64), np.asarray(a, dtype=np.float64))


def hover_ref(t: float, position: tuple[float, float, float] = (0.0, 0.0, HOVER_ALTITUDE)) -> RefPoint:
    return _point(position, np.zeros(3), np.zeros(3))


def step_ref(
    t: float,
    step_size: float = 2.0,
    axis: int = 0,
    t_step: float = 5.0,
    origin: tuple[float, float, float] = (0.0, 0.0, HOVER_ALTITUDE),
) -> RefPoint:
    """Piecewise-constant position: ``origin`` before ``t_step``, shifted by ``step_size`` after."""
    p = np.array(origin, dtype=np.float64)
    if t >= t_step:
        p[axis] += step_size
    return _point(p, np.zeros(3), np.zeros(3))


@dataclass(frozen=True)
class CircleSpec:
    radius: float = 1.5
    speed_start: float = 1.5
    speed_end: float = 3.0
    ramp_time: float = 40.0
    altitude: float = HOVER_ALTITUDE
    center: tuple[float, float] = (0.0, 0.0)

    def speed(self, t: float) -> float:
        if t >= self.ramp_time:
            return self.speed_end
        return self.speed_start + (self.speed_end - self.speed_start) * t / self.ramp_time


def circle_ref(t: float, spec: CircleSpec = CircleSpec()) -> RefPoint:
    """Circle in the XY plane whose tangential speed ramps linearly, then holds.

    The phase is the closed-form integral of ``speed / radius`` (quadratic
    during the ramp), so there is no numerical drift.
    """
    r = spec.radius
    ramp = (spec.speed_end - spec.speed_start) / spec.ramp_time
    if t <= spec.ramp_time:
        phase = (spec.speed_start * t + 0.5 * ramp * t * t) / r
        rate = (spec.speed_start + ramp * t) / r
        accel = ramp / r
    else:
        T = spec.ramp_time
        phase = (spec.speed_start * T + 0.5 * ramp * T * T + spec.speed_end * (t - T)) / r
        rate = spec.speed_end / r
        accel = 0.0
    c, s = math.cos(phase), math.sin(phase)
    cx, cy = spec.center
    p = (cx + r * c, cy + r * s, spec.altitude)
    v = (-r * rate * s, r * rate * c, 0.0)
    a = (-r * accel * s - r * rate * rate * c, r * accel * c - r * rate * rate * s, 0.0)
    return _point(p, v, a)


def lemniscate_ref(t: float, altitude: float = HOVER_ALTITUDE) -> RefPoint:
    """Figure-eight ``x = 2 cos(1.5 t)``, ``y = 2 cos(1.5 t) sin(1.5 t) = sin(3 t)``."""
    p = (2.0 * math.cos(1.5 * t), math.sin(3.0 * t), altitude)
    v = (-3.0 * math.sin(1.5 * t), 3.0 * math.cos(3.0 * t), 0.0)
    a = (-4.5 * math.cos(1.5 * t), -9.0 * math.sin(3.0 * t), 0.0)
    return _point(p, v, a)


def preview(trajectory: Trajectory, t: float, N: int, dt: float) -> list[RefPoint]:
    """Sample ``trajectory`` at ``t, t + dt, ..., t + N dt``."""
    if N < 1:
        raise ValueError("preview needs N >= 1")
    return [trajectory(t + k * dt) for k in range(N + 1)]


# --- data-collection excitation ---------------------------------------------


@dataclass(frozen=True)
class Segment:
    """One flight log worth of setpoints.

    ``kind`` is ``"steps"`` or ``"manual"``. Take-off and landing windows are
    flown but excluded from the recorded log.
    """

    name: str
    kind: str
    duration: float
    trajectory: Trajectory
    takeoff: float = 3.0
    landing: float = 3.0


class _SumOfSines:
    """Smooth pseudo-pilot setpoint: per-axis sum of sinusoids around a hover point."""

    def __init__(self, amps: np.ndarray, freqs: np.ndarray, phases: np.ndarray, center: np.ndarray, ramp: float) -> None:
        self.amps, self.freqs, self.phases = amps, freqs, phases
        self.center = center
        self.ramp = ramp

    def _envelope(self, t: float) -> tuple[float, float, float]:
        # smoothstep fade-in/out keeps the setpoint C2 at the segment ends
        if t <= 0.0:
            return 0.0, 0.0, 0.0
        if t >= self.ramp:
            return 1.0, 0.0, 0.0
        x = t / self.ramp
        e = x * x * (3.0 - 2.0 * x)
        de = 6.0 * x * (1.0 - x) / self.ramp
        dde = (6.0 - 12.0 * x) / (self.ramp * self.ramp)
        return e, de, dde

    def __call__(self, t: float) -> RefPoint:
        arg = self.freqs * t + self.phases
        s, c = np.sin(arg), np.cos(arg)
        base = np.sum(self.amps * s, axis=1)
        dbase = np.sum(self.amps * self.freqs * c, axis=1)
        ddbase = -np.sum(self.amps * self.freqs**2 * s, axis=1)
        e, de, dde = self._envelope(t)
        p = self.center + e * base
        v = de * base + e * dbase
        a = dde * base + 2.0 * de * dbase + e * ddbase
        return RefPoint(p, v, a)


class _StepSequence:
    def __init__(self, times: list[float], points: list[np.ndarray]) -> None:
        self.times = times
        self.points = points

    def __call__(self, t: float) -> RefPoint:
        idx = 0
        for k, tk in enumerate(self.times):
            if t >= tk:
                idx = k
        z = np.zeros(3)
        return RefPoint(self.points[idx].copy(), z, z.copy())


def _takeoff_wrap(inner: Trajectory, takeoff: float, start: np.ndarray) -> Trajectory:
    """Climb from ``start`` to the segment's first setpoint, then follow ``inner`` (time-shifted)."""
    first = inner(0.0).p_d

    def traj(t: float) -> RefPoint:
        if t < takeoff:
            x = t / takeoff
            e = x * x * (3.0 - 2.0 * x)
            de = 6.0 * x * (1.0 - x) / takeoff
            dde = (6.0 - 12.0 * x) / (takeoff * takeoff)
            d = first - start
            return RefPoint(start + e * d, de * d, dde * d)
        return inner(t - takeoff)

    return traj


def _manual_speed_scale(amps: np.ndarray, freqs: np.ndarray, phases: np.ndarray, duration: float, target: float) -> float:
    t = np.arange(0.0, duration, 0.01)
    arg = freqs[None, :, :] * t[:, None, None] + phases[None, :, :]
    vel = np.sum(amps * freqs * np.cos(arg), axis=2)
    peak = float(np.max(np.linalg.norm(vel, axis=1)))
    return target / peak


def excitation_program(
    seed: int = 0,
    reduced: bool = False,
    step_sizes: tuple[float, ...] = (1.0, 1.5, 2.0),
    repetitions: int = 3,
    dwell: float = 8.0,
    manual_duration: float = 80.0,
    manual_speeds: tuple[float, float, float] = (2.0, 2.8, 3.5),
    reduced_speed: float = 2.0,
    altitude: float = HOVER_ALTITUDE,
) -> list[Segment]:
    """Seeded data-collection program.

    Offboard analogue: for every step size, a log of steps along x, y and z
    (out and back), repeated ``repetitions`` times. Manual analogue: three
    intensity levels of smooth sum-of-sinusoid setpoints, also repeated.
    With ``reduced=True`` every manual segment is scaled so the commanded
    speed never exceeds ``reduced_speed``; segments are also shortened so the
    program keeps roughly two thirds of the samples.
    """
    rng = np.random.default_rng(seed)
    center = np.array([0.0, 0.0, altitude])
    ground = np.array([0.0, 0.0, 0.0])
    segments: list[Segment] = []
    step_reps = repetitions if not reduced else max(1, repetitions - 1)
    for rep in range(step_reps):
        for size in step_sizes:
            times, points = [0.0], [center.copy()]
            t = dwell
            for axis in range(3):
                for sign in (1.0, -1.0):
                    offset = np.zeros(3)
                    offset[axis] = sign * size
                    if axis == 2:
                        offset[axis] = sign * min(size, 1.0)
                    times.append(t)
                    points.append(center + offset)
                    t += dwell
                    times.append(t)
                    points.append(center.copy())
                    t += dwell
            inner = _StepSequence(times, points)
            seg = Segment(f"steps_{size:g}m_rep{rep}", "steps", t, inner)
            segments.append(_with_takeoff(seg, ground))
    if reduced:
        speeds = tuple(min(s, reduced_speed) for s in manual_speeds)
        manual_dur = manual_duration * 0.7
    else:
        speeds = manual_speeds
        manual_dur = manual_duration
    for rep in range(repetitions):
        for level, speed in enumerate(speeds):
            n_comp = 4
            freqs = rng.uniform(0.25, 1.3, size=(3, n_comp))
            phases = rng.uniform(0.0, 2.0 * math.pi, size=(3, n_comp))
            amps = rng.uniform(0.3, 1.0, size=(3, n_comp))
            amps[2] *= 0.35
            scale = _manual_speed_scale(amps, freqs, phases, manual_dur, speed)
            amps = amps * scale
            # keep the excursion bounded
            reach = np.sum(amps, axis=1)
            limit = np.array([2.0, 2.0, 0.9])
            shrink = np.minimum(1.0, limit / reach)
            amps = amps * shrink[:, None]
            # compensate the speed lost by shrinking with a uniform time scale
            freqs = freqs * _manual_speed_scale(amps, freqs, phases, manual_dur, speed)
            inner = _SumOfSines(amps, freqs, phases, center, ramp=3.0)
            # exact cap on the composed setpoint (fade-in included); linear in amps
            peak = max(float(np.linalg.norm(inner(t).v_d)) for t in np.arange(0.0, manual_dur + 0.005, 0.01))
            inner.amps = amps * min(1.0, speed / peak)
            seg = Segment(f"manual_l{level}_rep{rep}", "manual", manual_dur, inner)
            segments.append(_with_takeoff(seg, ground))
    return segments


def _with_takeoff(seg: Segment, ground: np.ndarray) -> Segment:
    traj = _takeoff_wrap(seg.trajectory, seg.takeoff, ground)
    return Segment(seg.name, seg.kind, seg.duration, traj, seg.takeoff, seg.landing)


def program_duration(segments: list[Segment]) -> float:
    """Recorded (take-off/landing excluded) time of a program [s]."""
    return sum(s.duration for s in segments)
