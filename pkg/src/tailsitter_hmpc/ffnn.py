"""One-hidden-layer sigmoid/linear network for residual accelerations.

Inputs ``[u, v, w, phi, theta, T]`` are min-max normalised to ``[-1, 1]``; the
network output lives in normalised target units and is mapped back to m/s^2.
Training is full-batch Levenberg-Marquardt on the normalised data.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from numpy.typing import NDArray

from .data import Dataset, NormStats

log = logging.getLogger(__name__)

N_IN = 6
N_OUT = 3
FORMAT_TAG = "tailsitter-hmpc-mlp/1"


class TrainingError(RuntimeError):
    pass


def sigmoid(z: NDArray[np.float64]) -> NDArray[np.float64]:
    # split form avoids overflow warnings for large |z|
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


@dataclass
class MlpModel:
    """Weights ``W`` (H x 6), ``B`` (H), ``w`` (3 x H), ``b`` (3) plus normalisation."""

    W: NDArray[np.float64]
    B: NDArray[np.float64]
    w: NDArray[np.float64]
    b: NDArray[np.float64]
    norm: NormStats = field(default_factory=NormStats.identity)

    def __post_init__(self) -> None:
        self.W = np.asarray(self.W, dtype=np.float64)
        self.B = np.asarray(self.B, dtype=np.float64).reshape(-1)
        self.w = np.asarray(self.w, dtype=np.float64)
        self.b = np.asarray(self.b, dtype=np.float64).reshape(-1)
        H = self.B.size
        if self.W.shape != (H, N_IN) or self.w.shape != (N_OUT, H) or self.b.shape != (N_OUT,):
            raise ValueError(
                f"inconsistent MLP shapes W{self.W.shape} B{self.B.shape} w{self.w.shape} b{self.b.shape}"
            )
        for arr in (self.W, self.B, self.w, self.b):
            if not np.all(np.isfinite(arr)):
                raise ValueError("non-finite MLP parameter")

    @property
    def H(self) -> int:
        return self.B.size

    @property
    def n_params(self) -> int:
        return self.H * (N_IN + 1) + N_OUT * (self.H + 1)

    @classmethod
    def zeros(cls, H: int, norm: NormStats | None = None) -> MlpModel:
        return cls(np.zeros((H, N_IN)), np.zeros(H), np.zeros((N_OUT, H)), np.zeros(N_OUT), norm or NormStats.identity())

    def params(self) -> NDArray[np.float64]:
        """Flattened ``[W (row-major), B, w (row-major), b]``."""
        return np.concatenate([self.W.ravel(), self.B, self.w.ravel(), self.b])

    def with_params(self, theta: NDArray[np.float64]) -> MlpModel:
        H = self.H
        i = 0
        W = theta[i : i + H * N_IN].reshape(H, N_IN)
        i += H * N_IN
        B = theta[i : i + H]
        i += H
        w = theta[i : i + N_OUT * H].reshape(N_OUT, H)
        i += N_OUT * H
        b = theta[i : i + N_OUT]
        return MlpModel(W.copy(), B.copy(), w.copy(), b.copy(), self.norm)

    # residual-model protocol used by the MPC ------------------------------
    def predict(self, x: NDArray[np.float64]) -> NDArray[np.float64]:
        return mlp_forward(self, x)

    def predict_with_jacobian(self, x: NDArray[np.float64]) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
        return mlp_forward_and_jacobian(self, x)


def _check_input(x: NDArray[np.float64]) -> NDArray[np.float64]:
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != N_IN:
        raise ValueError(f"MLP input must have {N_IN} columns, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise ValueError("non-finite MLP input")
    return x


def forward_normalized(model: MlpModel, xn: NDArray[np.float64]) -> NDArray[np.float64]:
    """Raw network output for already-normalised inputs."""
    return sigmoid(xn @ model.W.T + model.B) @ model.w.T + model.b


def mlp_forward(model: MlpModel, x: NDArray[np.float64]) -> NDArray[np.float64]:
    """Predicted residual acceleration [m/s^2] for one input (6,) or a batch (n, 6)."""
    x = _check_input(x)
    xn = model.norm.normalize_inputs(x)
    return model.norm.denormalize_targets(forward_normalized(model, xn))


def _input_scale(norm: NormStats) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    return 2.0 / (norm.input_max - norm.input_min), 0.5 * (norm.target_max - norm.target_min)


def mlp_forward_and_jacobian(model: MlpModel, x: NDArray[np.float64]) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    """Output and ``d output / d input`` (3 x 6 per sample) in physical units."""
    x = _check_input(x)
    sin, sout = _input_scale(model.norm)
    xn = model.norm.normalize_inputs(x)
    s = sigmoid(xn @ model.W.T + model.B)
    y = model.norm.denormalize_targets(s @ model.w.T + model.b)
    ds = s * (1.0 - s)
    # J[..., k, i] = sout_k * sum_h w[k, h] ds_h W[h, i] * sin_i
    J = np.einsum("kh,...h,hi->...ki", model.w, ds, model.W * sin)
    J *= sout[:, None]
    return y, J


def mlp_input_jacobian(model: MlpModel, x: NDArray[np.float64]) -> NDArray[np.float64]:
    return mlp_forward_and_jacobian(model, x)[1]


def mlp_param_jacobian(model: MlpModel, x: NDArray[np.float64]) -> NDArray[np.float64]:
    """``d alpha / d theta`` of the raw (normalised-unit) output.

    Shape ``(3, P)`` for one input or ``(n, 3, P)`` for a batch, with the
    parameter order of :meth:`MlpModel.params`.
    """
    x = _check_input(x)
    single = x.ndim == 1
    xn = np.atleast_2d(model.norm.normalize_inputs(x))
    J = _param_jacobian_normalized(model, xn)
    return J[0] if single else J


def _param_jacobian_normalized(model: MlpModel, xn: NDArray[np.float64]) -> NDArray[np.float64]:
    n, H = xn.shape[0], model.H
    s = sigmoid(xn @ model.W.T + model.B)
    ds = s * (1.0 - s)
    J = np.zeros((n, N_OUT, model.n_params))
    for k in range(N_OUT):
        a = model.w[k] * ds  # (n, H)
        J[:, k, : H * N_IN] = (a[:, :, None] * xn[:, None, :]).reshape(n, H * N_IN)
        J[:, k, H * N_IN : H * (N_IN + 1)] = a
        off = H * (N_IN + 1) + k * H
        J[:, k, off : off + H] = s
        J[:, k, H * (N_IN + 1) + N_OUT * H + k] = 1.0
    return J


# --- Levenberg-Marquardt ---------------------------------------------------------


@dataclass(frozen=True)
class TrainConfig:
    mu0: float = 1e-3
    mu_inc: float = 10.0
    mu_dec: float = 0.1
    mu_max: float = 1e10
    max_epochs: int = 300
    max_val_failures: int = 6
    min_grad: float = 1e-9
    max_rows: int = 50_000
    chunk_rows: int = 4096
    seed: int = 0

    def __post_init__(self) -> None:
        if self.mu0 <= 0 or self.mu_inc <= 1 or not 0 < self.mu_dec < 1:
            raise ValueError("invalid LM damping schedule")


@dataclass
class TrainReport:
    hidden: int
    train_mse: list[float]
    val_mse: list[float]
    mu: list[float]
    test_rmse: list[float]
    nominal_rmse: list[float]
    epochs: int
    stop_reason: str
    best_epoch: int

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def nguyen_widrow_init(H: int, rng: np.random.Generator) -> MlpModel:
    """Nguyen-Widrow hidden layer (spread over the sigmoid's active region), small output layer."""
    beta = 0.7 * H ** (1.0 / N_IN)
    W = rng.uniform(-1.0, 1.0, size=(H, N_IN))
    W *= beta / np.linalg.norm(W, axis=1, keepdims=True)
    # logistic active region is ~4x wider than tanh's
    W *= 4.0
    B = rng.uniform(-4.0 * beta, 4.0 * beta, size=H)
    w = rng.uniform(-0.5, 0.5, size=(N_OUT, H)) / math.sqrt(H)
    b = rng.uniform(-0.5, 0.5, size=N_OUT)
    return MlpModel(W, B, w, b)


def _mse(model: MlpModel, X: NDArray[np.float64], Y: NDArray[np.float64]) -> float:
    r = forward_normalized(model, X) - Y
    return float(np.mean(r * r))


def _normal_equations(model: MlpModel, X: NDArray[np.float64], Y: NDArray[np.float64], chunk: int):
    P = model.n_params
    JtJ = np.zeros((P, P))
    Jtr = np.zeros(P)
    for i in range(0, X.shape[0], chunk):
        xc = X[i : i + chunk]
        J = _param_jacobian_normalized(model, xc).reshape(-1, P)
        r = (forward_normalized(model, xc) - Y[i : i + chunk]).reshape(-1)
        JtJ += J.T @ J
        Jtr += J.T @ r
    return JtJ, Jtr


def train_lm(dataset: Dataset, H: int = 10, cfg: TrainConfig = TrainConfig()) -> tuple[MlpModel, TrainReport]:
    """Levenberg-Marquardt training with validation early stopping.

    A step ``(J^T J + mu I) d = -J^T r`` is accepted only if it lowers the
    training MSE (then ``mu *= mu_dec``); otherwise ``mu *= mu_inc`` and the
    step is retried. Returns the model with the lowest validation MSE.
    """
    Xtr, Ytr = dataset.part("train")
    Xva, Yva = dataset.part("val")
    Xte, Yte = dataset.part("test")
    if Xtr.shape[0] == 0 or Xva.shape[0] == 0:
        raise ValueError("dataset needs non-empty train and validation splits")
    norm = dataset.norm
    rng = np.random.default_rng(cfg.seed)
    if Xtr.shape[0] > cfg.max_rows:
        keep = np.sort(rng.choice(Xtr.shape[0], cfg.max_rows, replace=False))
        Xtr, Ytr = Xtr[keep], Ytr[keep]
    Xn, Yn = norm.normalize_inputs(Xtr), norm.normalize_targets(Ytr)
    Xvn, Yvn = norm.normalize_inputs(Xva), norm.normalize_targets(Yva)

    model = nguyen_widrow_init(H, rng)
    model.norm = norm
    theta = model.params()
    mu = cfg.mu0
    perf = _mse(model, Xn, Yn)
    best_val = _mse(model, Xvn, Yvn)
    best_theta, best_epoch = theta.copy(), 0
    train_hist, val_hist, mu_hist = [perf], [best_val], [mu]
    fails = 0
    stop = "max_epochs"
    epoch = 0
    eye = np.eye(theta.size)
    for epoch in range(1, cfg.max_epochs + 1):
        JtJ, Jtr = _normal_equations(model, Xn, Yn, cfg.chunk_rows)
        grad = 2.0 * float(np.linalg.norm(Jtr)) / Yn.size
        if grad < cfg.min_grad:
            stop = "min_grad"
            epoch -= 1
            break
        accepted = False
        solved_any = False
        while mu <= cfg.mu_max:
            try:
                step = np.linalg.solve(JtJ + mu * eye, -Jtr)
            except np.linalg.LinAlgError:
                mu *= cfg.mu_inc
                continue
            solved_any = True
            trial = model.with_params(theta + step)
            trial_perf = _mse(trial, Xn, Yn)
            if trial_perf < perf:
                model, theta, perf = trial, theta + step, trial_perf
                mu *= cfg.mu_dec
                accepted = True
                break
            mu *= cfg.mu_inc
        if not accepted:
            if not solved_any or not np.all(np.isfinite(JtJ)):
                raise TrainingError("normal matrix singular or non-finite up to the maximum damping")
            stop = "mu_max"
            epoch -= 1
            break
        val = _mse(model, Xvn, Yvn)
        train_hist.append(perf)
        val_hist.append(val)
        mu_hist.append(mu)
        if val < best_val:
            best_val, best_theta, best_epoch = val, theta.copy(), epoch
            fails = 0
        else:
            fails += 1
            if fails >= cfg.max_val_failures:
                stop = "validation"
                break
        log.debug("H=%d epoch %d train %.5g val %.5g mu %.1e", H, epoch, perf, val, mu)

    best = model.with_params(best_theta)
    test_rmse, nominal = evaluate_rmse(best, Xte, Yte)
    report = TrainReport(
        hidden=H,
        train_mse=train_hist,
        val_mse=val_hist,
        mu=mu_hist,
        test_rmse=test_rmse,
        nominal_rmse=nominal,
        epochs=epoch,
        stop_reason=stop,
        best_epoch=best_epoch,
    )
    return best, report


def evaluate_rmse(model: MlpModel, X: NDArray[np.float64], a_res: NDArray[np.float64]) -> tuple[list[float], list[float]]:
    """Per-axis RMSE of the hybrid model and of the nominal model (which predicts zero residual)."""
    if X.shape[0] == 0:
        return [math.nan] * 3, [math.nan] * 3
    err = mlp_forward(model, X) - a_res
    hybrid = np.sqrt(np.mean(err**2, axis=0))
    nominal = np.sqrt(np.mean(a_res**2, axis=0))
    return hybrid.tolist(), nominal.tolist()


# --- persistence ------------------------------------------------------------------


def save_model(model: MlpModel, path: str | Path) -> None:
    """JSON with every array row-major; floats use round-trip repr precision."""
    n = model.norm
    doc = {
        "format": FORMAT_TAG,
        "H": model.H,
        "W": model.W.tolist(),
        "B": model.B.tolist(),
        "w": model.w.tolist(),
        "b": model.b.tolist(),
        "input_min": n.input_min.tolist(),
        "input_max": n.input_max.tolist(),
        "target_min": n.target_min.tolist(),
        "target_max": n.target_max.tolist(),
    }
    Path(path).write_text(json.dumps(doc, indent=1))


def load_model(path: str | Path) -> MlpModel:
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ValueError(f"{path}: malformed model file ({exc})") from exc
    if not isinstance(doc, dict) or doc.get("format") != FORMAT_TAG:
        raise ValueError(f"{path}: not a {FORMAT_TAG} model file")
    try:
        H = int(doc["H"])
        W = np.array(doc["W"], dtype=np.float64)
        B = np.array(doc["B"], dtype=np.float64)
        w = np.array(doc["w"], dtype=np.float64)
        b = np.array(doc["b"], dtype=np.float64)
        norm = NormStats(*(np.array(doc[k], dtype=np.float64) for k in ("input_min", "input_max", "target_min", "target_max")))
    except (KeyError, TypeError, ValueError) as exc:
        raise ValueError(f"{path}: malformed model file ({exc})") from exc
    if W.shape != (H, N_IN) or B.shape != (H,) or w.shape != (N_OUT, H) or b.shape != (N_OUT,):
        raise ValueError(f"{path}: array shapes do not match H={H}")
    if norm.input_min.shape != (N_IN,) or norm.target_min.shape != (N_OUT,):
        raise ValueError(f"{path}: normalisation vectors have wrong length")
    return MlpModel(W, B, w, b, norm)
