"""Flight-log processing: resampling, smoothing, differentiation, residual targets.

Raw logs carry measured pose and the commanded inputs. ``build_dataset`` turns
them into residual-acceleration training samples::

    resample to 100 Hz -> moving average -> d/dt (velocity)
                       -> moving average (all channels) -> d/dt (acceleration)
    a_res = a - nominal_acceleration(v, att, T)

Smoothing every channel twice keeps the velocity, attitude, thrust and
acceleration features on the same effective filter, so the residual target is
not polluted by filter-lag mismatch.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple, Sequence

import numpy as np
from numpy.typing import NDArray

from .core import EulerAttitude, VehicleParams

RATE = 100.0
DT = 1.0 / RATE
MAX_GAP = 0.5
SPLIT_NAMES = ("train", "val", "test")
INPUT_NAMES = ("u", "v", "w", "phi", "theta", "T")
RAW_COLUMNS = ("t", "x", "y", "z", "phi", "theta", "psi", "T_cmd", "phi_cmd", "theta_cmd")
DATASET_COLUMNS = (
    "t", "u", "v", "w", "phi", "theta", "T",
    "ax", "ay", "az", "ares_x", "ares_y", "ares_z", "split_tag",
)  # fmt: skip


class LogError(ValueError):
    """Raised for corrupt or unusable flight logs."""


@dataclass
class RawLog:
    """Time-stamped measured pose and commands; rows may be unevenly spaced.

    ``att`` columns are ``(phi, theta, psi)``; ``cmd`` columns are
    ``(T, phi_cmd, theta_cmd)``.
    """

    t: NDArray[np.float64]
    p: NDArray[np.float64]
    att: NDArray[np.float64]
    cmd: NDArray[np.float64]
    name: str = ""

    def __post_init__(self) -> None:
        self.t = np.asarray(self.t, dtype=np.float64).reshape(-1)
        n = self.t.size
        self.p = np.asarray(self.p, dtype=np.float64).reshape(n, 3)
        self.att = np.asarray(self.att, dtype=np.float64).reshape(n, 3)
        self.cmd = np.asarray(self.cmd, dtype=np.float64).reshape(n, 3)

    def __len__(self) -> int:
        return self.t.size

    def check(self) -> None:
        if self.t.size < 2:
            raise LogError(f"log {self.name!r} has fewer than two rows")
        dt = np.diff(self.t)
        if np.any(dt <= 0):
            raise LogError(f"log {self.name!r}: timestamps not strictly increasing")
        if np.any(dt > MAX_GAP):
            raise LogError(f"log {self.name!r}: gap of {dt.max():.3f} s exceeds {MAX_GAP} s")


class FlightSample(NamedTuple):
    t: float
    v: NDArray[np.float64]
    att: EulerAttitude
    T: float
    a: NDArray[np.float64]
    a_nonlin: NDArray[np.float64]
    a_res: NDArray[np.float64]


@dataclass(frozen=True)
class NormStats:
    """Min-max statistics mapping each channel to ``[-1, 1]``."""

    input_min: NDArray[np.float64]
    input_max: NDArray[np.float64]
    target_min: NDArray[np.float64]
    target_max: NDArray[np.float64]

    @staticmethod
    def _range(x: NDArray[np.float64]) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
        lo, hi = x.min(axis=0).astype(np.float64), x.max(axis=0).astype(np.float64)
        flat = hi <= lo
        # a constant channel gets a unit half-range so normalisation stays defined
        lo = np.where(flat, lo - 1.0, lo)
        hi = np.where(flat, hi + 1.0, hi)
        return lo, hi

    @classmethod
    def fit(cls, inputs: NDArray[np.float64], targets: NDArray[np.float64]) -> NormStats:
        imin, imax = cls._range(inputs)
        tmin, tmax = cls._range(targets)
        return cls(imin, imax, tmin, tmax)

    @classmethod
    def identity(cls, n_in: int = 6, n_out: int = 3) -> NormStats:
        return cls(-np.ones(n_in), np.ones(n_in), -np.ones(n_out), np.ones(n_out))

    def normalize_inputs(self, x: NDArray[np.float64]) -> NDArray[np.float64]:
        return 2.0 * (x - self.input_min) / (self.input_max - self.input_min) - 1.0

    def normalize_targets(self, y: NDArray[np.float64]) -> NDArray[np.float64]:
        return 2.0 * (y - self.target_min) / (self.target_max - self.target_min) - 1.0

    def denormalize_targets(self, y: NDArray[np.float64]) -> NDArray[np.float64]:
        return (y + 1.0) * 0.5 * (self.target_max - self.target_min) + self.target_min


@dataclass
class Dataset:
    """Struct-of-arrays residual dataset.

    ``inputs`` columns follow ``INPUT_NAMES``; ``split`` holds 0/1/2 for
    train/val/test.
    """

    t: NDArray[np.float64]
    inputs: NDArray[np.float64]
    acc: NDArray[np.float64]
    a_res: NDArray[np.float64]
    split: NDArray[np.int8]
    norm: NormStats | None = None
    a_nonlin: NDArray[np.float64] = field(init=False)

    def __post_init__(self) -> None:
        self.a_nonlin = self.acc - self.a_res
        if self.norm is None and np.any(self.split == 0):
            tr = self.split == 0
            self.norm = NormStats.fit(self.inputs[tr], self.a_res[tr])

    def __len__(self) -> int:
        return self.t.size

    def part(self, name: str) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
        """``(inputs, a_res)`` of one split."""
        mask = self.split == SPLIT_NAMES.index(name)
        return self.inputs[mask], self.a_res[mask]

    def sample(self, i: int) -> FlightSample:
        x = self.inputs[i]
        return FlightSample(
            float(self.t[i]), x[0:3].copy(), EulerAttitude(x[3], x[4], 0.0), float(x[5]),
            self.acc[i].copy(), self.a_nonlin[i].copy(), self.a_res[i].copy(),
        )  # fmt: skip

    def counts(self) -> tuple[int, int, int]:
        return tuple(int(np.sum(self.split == k)) for k in range(3))  # type: ignore[return-value]


# --- signal processing -------------------------------------------------------


def resample_100hz(log: RawLog) -> RawLog:
    """Linear interpolation of every channel onto ``k / 100`` s inside the log span."""
    log.check()
    if log.t[-1] - log.t[0] < 1.0:
        raise LogError(f"log {log.name!r} spans less than 1 s")
    k0 = math.ceil(log.t[0] * RATE - 1e-6)
    k1 = math.floor(log.t[-1] * RATE + 1e-6)
    grid = np.arange(k0, k1 + 1) / RATE
    grid = np.clip(grid, log.t[0], log.t[-1])

    def interp(x: NDArray[np.float64]) -> NDArray[np.float64]:
        return np.column_stack([np.interp(grid, log.t, x[:, j]) for j in range(x.shape[1])])

    return RawLog(grid, interp(log.p), interp(log.att), interp(log.cmd), log.name)


def moving_average(series: NDArray[np.float64], window: int) -> NDArray[np.float64]:
    """Centred moving average along axis 0.

    Near the ends the window is truncated to the samples that exist, e.g.
    ``[0, 1, 2, 3, 4]`` with ``window=3`` gives ``[0.5, 1, 2, 3, 3.5]``.
    """
    x = np.asarray(series, dtype=np.float64)
    n = x.shape[0]
    if window < 1 or window % 2 == 0:
        raise ValueError(f"window must be an odd positive integer, got {window}")
    if window > n:
        raise ValueError(f"window {window} longer than series ({n})")
    if window == 1:
        return x.copy()
    half = window // 2
    csum = np.concatenate([np.zeros((1,) + x.shape[1:]), np.cumsum(x, axis=0)])
    idx = np.arange(n)
    lo = np.maximum(idx - half, 0)
    hi = np.minimum(idx + half + 1, n)
    count = (hi - lo).reshape((n,) + (1,) * (x.ndim - 1))
    out = (csum[hi] - csum[lo]) / count
    # exact interior values; cumulative sums drift on long logs
    if x.ndim == 1:
        interior = np.convolve(x, np.ones(window) / window, mode="valid")
    else:
        kern = np.ones(window) / window
        interior = np.column_stack([np.convolve(x[:, j], kern, mode="valid") for j in range(x.shape[1])])
    out[half : n - half] = interior
    return out


def differentiate(series: NDArray[np.float64], dt: float = DT) -> NDArray[np.float64]:
    """Central differences inside, first-order one-sided differences at the ends."""
    x = np.asarray(series, dtype=np.float64)
    if x.shape[0] < 3:
        raise ValueError("need at least three samples to differentiate")
    return np.gradient(x, dt, axis=0, edge_order=1)


def nominal_acceleration(v, att, T, params: VehicleParams) -> NDArray[np.float64]:
    """Thrust + gravity acceleration; vectorised over leading dimensions.

    ``att`` may be an :class:`EulerAttitude` or an array whose last axis
    starts with ``(phi, theta)``. ``v`` is accepted for signature symmetry
    with the drag-augmented model and does not enter the result.
    """
    a = np.asarray(att, dtype=np.float64)
    phi, theta = a[..., 0], a[..., 1]
    thrust = np.asarray(T, dtype=np.float64)
    f = thrust / params.m
    cf = np.cos(phi)
    return np.stack([cf * np.sin(theta) * f, -np.sin(phi) * f, -params.g + cf * np.cos(theta) * f], axis=-1)


# --- dataset assembly ----------------------------------------------------------


class _Processed(NamedTuple):
    t: NDArray[np.float64]
    inputs: NDArray[np.float64]
    acc: NDArray[np.float64]


def process_log(log: RawLog, window: int = 15) -> _Processed:
    """Resample, smooth and differentiate one log; edge samples are trimmed."""
    r = resample_100hz(log)
    p1 = moving_average(r.p, window)
    att1 = moving_average(r.att[:, :2], window)
    T1 = moving_average(r.cmd[:, 0], window)
    v1 = differentiate(p1)
    v2 = moving_average(v1, window)
    att2 = moving_average(att1, window)
    T2 = moving_average(T1, window)
    acc = differentiate(v2)
    trim = window + 1
    if r.t.size <= 2 * trim + 1:
        raise LogError(f"log {log.name!r} too short after trimming")
    sl = slice(trim, r.t.size - trim)
    inputs = np.column_stack([v2, att2, T2])
    return _Processed(r.t[sl], inputs[sl], acc[sl])


def _block_split(block_sizes: list[int], seed: int, fractions=(0.70, 0.15, 0.15)) -> NDArray[np.int8]:
    """Shuffle contiguous blocks, concatenate, cut at the target proportions."""
    n = sum(block_sizes)
    starts = np.cumsum([0] + block_sizes[:-1])
    order = np.random.default_rng(seed).permutation(len(block_sizes))
    seq = np.concatenate([np.arange(starts[b], starts[b] + block_sizes[b]) for b in order])
    n_train = int(round(fractions[0] * n))
    n_val = int(round(fractions[1] * n))
    split = np.empty(n, dtype=np.int8)
    split[seq[:n_train]] = 0
    split[seq[n_train : n_train + n_val]] = 1
    split[seq[n_train + n_val :]] = 2
    return split


def build_dataset(
    logs: Sequence[RawLog],
    params: VehicleParams,
    window: int = 15,
    seed: int = 0,
    block_seconds: float = 5.0,
) -> Dataset:
    """Residual dataset from raw logs with a seeded 70/15/15 block split."""
    if not logs:
        raise ValueError("no logs given")
    parts = [process_log(log, window) for log in logs]
    block = max(1, int(round(block_seconds * RATE)))
    sizes: list[int] = []
    for pr in parts:
        n = pr.t.size
        sizes.extend([block] * (n // block))
        if n % block:
            sizes.append(n % block)
    t = np.concatenate([pr.t for pr in parts])
    inputs = np.concatenate([pr.inputs for pr in parts])
    acc = np.concatenate([pr.acc for pr in parts])
    a_nonlin = nominal_acceleration(inputs[:, 0:3], inputs[:, 3:5], inputs[:, 5], params)
    split = _block_split(sizes, seed)
    return Dataset(t, inputs, acc, acc - a_nonlin, split)


# --- identification --------------------------------------------------------------


def identify_first_order_tau(cmd, response, dt: float = DT, min_excitation: float = 1e-10) -> float:
    """Time constant of ``x_dot = (cmd - x) / tau`` by least squares.

    The one-step difference ``x[k+1] - x[k]`` is regressed on
    ``cmd[k] - x[k]`` (no intercept); the slope is mapped to ``tau`` through
    the exact zero-order-hold discretisation, so noiseless sampled
    first-order data are recovered to rounding error.
    """
    c = np.asarray(cmd, dtype=np.float64).reshape(-1)
    x = np.asarray(response, dtype=np.float64).reshape(-1)
    if c.size != x.size or c.size < 3:
        raise ValueError("cmd and response must have equal length >= 3")
    reg = c[:-1] - x[:-1]
    dx = np.diff(x)
    if float(np.mean(reg**2)) < min_excitation:
        raise ValueError("insufficient excitation to identify a time constant")
    slope = float(reg @ dx) / float(reg @ reg)
    if not 0.0 < slope < 1.0:
        raise ValueError(f"identified decay factor {1 - slope:.4g} is not a stable first-order lag")
    return -dt / math.log1p(-slope)


def identify_attitude_taus(logs: Sequence[RawLog], window: int = 15) -> tuple[float, float]:
    """Roll and pitch time constants from smoothed, resampled logs (pooled)."""
    cmds: list[list[NDArray[np.float64]]] = [[], []]
    resp: list[list[NDArray[np.float64]]] = [[], []]
    for log in logs:
        r = resample_100hz(log)
        for j in range(2):
            c = moving_average(r.cmd[:, 1 + j], window)
            x = moving_average(r.att[:, j], window)
            cmds[j].append(c)
            resp[j].append(x)
    taus = []
    for j in range(2):
        # pool by stacking regressors; log boundaries must not be differenced across
        reg = np.concatenate([c[:-1] - x[:-1] for c, x in zip(cmds[j], resp[j])])
        dx = np.concatenate([np.diff(x) for x in resp[j]])
        if float(np.mean(reg**2)) < 1e-10:
            raise ValueError("insufficient excitation to identify a time constant")
        slope = float(reg @ dx) / float(reg @ reg)
        if not 0.0 < slope < 1.0:
            raise ValueError("identified attitude lag is not a stable first-order response")
        taus.append(-DT / math.log1p(-slope))
    return taus[0], taus[1]


def identify_drag_coeffs(dataset: Dataset, split: str | None = "train") -> tuple[float, float, float]:
    """Per-axis least squares of ``a_res`` on ``v |v|`` (inertial); signed coefficients."""
    if len(dataset) == 0:
        raise ValueError("empty dataset")
    if split is None:
        v, a_res = dataset.inputs[:, 0:3], dataset.a_res
    else:
        v, a_res = dataset.part(split)
    out = []
    for j in range(3):
        q = v[:, j] * np.abs(v[:, j])
        den = float(q @ q)
        if den < 1e-12 * max(1, q.size):
            raise ValueError(f"degenerate drag regressor on axis {j}")
        out.append(float(q @ a_res[:, j]) / den)
    return out[0], out[1], out[2]


# --- file I/O --------------------------------------------------------------------


def write_raw_log(log: RawLog, path: str | Path) -> None:
    data = np.column_stack([log.t, log.p, log.att, log.cmd])
    np.savetxt(path, data, delimiter=",", fmt="%.17g", header=",".join(RAW_COLUMNS), comments="")


def read_raw_log(path: str | Path) -> RawLog:
    path = Path(path)
    with open(path) as fh:
        header = fh.readline().strip().split(",")
    if tuple(header) != RAW_COLUMNS:
        raise LogError(f"{path}: unexpected raw-log header {header}")
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    if data.shape[1] != len(RAW_COLUMNS):
        raise LogError(f"{path}: expected {len(RAW_COLUMNS)} columns, got {data.shape[1]}")
    return RawLog(data[:, 0], data[:, 1:4], data[:, 4:7], data[:, 7:10], path.stem)


def write_dataset(ds: Dataset, path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(DATASET_COLUMNS)
        for i in range(len(ds)):
            row = [ds.t[i], *ds.inputs[i], *ds.acc[i], *ds.a_res[i]]
            w.writerow([repr(float(x)) for x in row] + [SPLIT_NAMES[ds.split[i]]])


def read_dataset(path: str | Path) -> Dataset:
    with open(path, newline="") as fh:
        rows = csv.reader(fh)
        header = next(rows, None)
        if header is None or tuple(header) != DATASET_COLUMNS:
            raise ValueError(f"{path}: unexpected dataset header {header}")
        num, tags = [], []
        for row in rows:
            if len(row) != len(DATASET_COLUMNS):
                raise ValueError(f"{path}: malformed row {row}")
            num.append([float(x) for x in row[:-1]])
            tags.append(SPLIT_NAMES.index(row[-1]))
    data = np.array(num, dtype=np.float64).reshape(-1, len(DATASET_COLUMNS) - 1)
    return Dataset(data[:, 0], data[:, 1:7], data[:, 7:10], data[:, 10:13], np.array(tags, dtype=np.int8))
