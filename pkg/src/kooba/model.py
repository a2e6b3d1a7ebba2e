"""End-to-end forecasting model: fit control weights, roll out forecasts.

Each state feature is an independent scalar channel sharing the control
block. Per training window the pipeline is: project the history into
Legendre coefficients (one block update), rescale them into a companion
system, propagate the lifted state over the horizon, and read out forecasts.
The rollout is affine in the control weights b, so every window reduces to

    forecast = alpha + G b

with alpha the control-free response and G the per-channel control response.
Gradient descent uses the exact gradient of the MSE through that affine map;
closed_form_b solves the same regression directly and serves as the test
oracle for the optimizer.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field, asdict
from typing import NamedTuple

import numpy as np

from . import hippo, koopman
from .data import window
from .errors import ConfigError, InputError, TrainingAbortedError

log = logging.getLogger(__name__)

MODEL_FORMAT = 1


@dataclass(frozen=True)
class ModelConfig:
    method: str = "legs"
    order: int = 6
    omega: float | None = None        # legt window length; defaults to seq_len * dt_basis
    dt_basis: float | None = None     # projection step; defaults to 2 / seq_len
    dt_system: float | None = None    # forecast step; defaults to 2 / seq_len
    controls: int = 1
    seq_len: int = 8
    horizon: int = 1
    learning_rate: float = 1e-3
    epochs: int = 50
    batch_size: int = 32
    stride: int | None = None         # defaults to seq_len (non-overlapping)
    seed: int = 0
    s0: float = 1.0                   # lifted-state evaluation point
    momentum: float = 0.0
    teacher_forcing: bool = False
    extended_order: bool = False

    def __post_init__(self):
        if self.method not in ("legt", "legs"):
            raise ConfigError(f"method must be 'legt' or 'legs', got {self.method!r}")
        if self.order < 1:
            raise ConfigError(f"order must be at least 1, got {self.order}")
        koopman.check_order(self.order, self.extended_order)
        if self.controls < 1:
            raise ConfigError(f"need at least one control feature, got {self.controls}")
        if self.seq_len < 1 or self.horizon < 1:
            raise ConfigError(f"seq_len and horizon must be positive, got "
                              f"({self.seq_len}, {self.horizon})")
        if self.epochs < 1 or self.batch_size < 1:
            raise ConfigError(f"epochs and batch_size must be positive, got "
                              f"({self.epochs}, {self.batch_size})")
        if self.learning_rate <= 0:
            raise ConfigError(f"learning rate must be positive, got {self.learning_rate}")
        if self.stride is not None and self.stride < 1:
            raise ConfigError(f"stride must be positive, got {self.stride}")
        for name in ("omega", "dt_basis", "dt_system"):
            v = getattr(self, name)
            if v is not None and v <= 0:
                raise ConfigError(f"{name} must be positive, got {v}")
        if not -1.0 <= self.s0 <= 1.0:
            raise ConfigError(f"s0 must lie in [-1, 1], got {self.s0}")
        if not 0.0 <= self.momentum < 1.0:
            raise ConfigError(f"momentum must lie in [0, 1), got {self.momentum}")

    @property
    def eff_stride(self) -> int:
        return self.seq_len if self.stride is None else self.stride

    @property
    def eff_dt_basis(self) -> float:
        # one window of seq_len samples spans the length-2 canonical domain
        return 2.0 / self.seq_len if self.dt_basis is None else self.dt_basis

    @property
    def eff_dt_system(self) -> float:
        return 2.0 / self.seq_len if self.dt_system is None else self.dt_system

    @property
    def eff_omega(self) -> float | None:
        if self.method != "legt":
            return None
        return self.seq_len * self.eff_dt_basis if self.omega is None else self.omega


def build_basis(config: ModelConfig) -> hippo.HippoBasis:
    return hippo.build_basis(config.method, config.order, dt=config.eff_dt_basis,
                             omega=config.eff_omega)


@dataclass(frozen=True)
class FlightKoobaModel:
    """Trained model: config, per-feature control weights, training history."""
    config: ModelConfig
    b: np.ndarray                     # (n_features, controls)
    loss_history: list[float] = field(default_factory=list)
    skipped_windows: int = 0

    @property
    def n_features(self) -> int:
        return self.b.shape[0]

    @property
    def parameter_count(self) -> int:
        return int(self.b.size)


class WindowRegression(NamedTuple):
    """Per-feature affine pieces (alpha, G, y) for one training window."""
    alpha: list[np.ndarray]
    G: list[np.ndarray]
    y: list[np.ndarray]


def _as_2d(arr, name: str) -> np.ndarray:
    arr = np.asarray(arr, dtype=float)
    if arr.ndim == 1:
        arr = arr[:, None]
    if arr.ndim != 2:
        raise InputError(f"{name} must be a (time, features) matrix, got shape {arr.shape}")
    return arr


def _rollout_pieces(coeffs: koopman.PolyODECoeffs, config: ModelConfig,
                    u_future: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Control-free response alpha and per-channel response matrix G."""
    h, m = u_future.shape
    _, abar, w = koopman.companion_discrete(coeffs, config.eff_dt_system)
    a = coeffs.a
    alpha = np.empty(h)
    G = np.empty((h, m))
    x = koopman.lift_initial_state(config.order, config.s0).x
    xc = np.zeros((m, config.order))    # control responses start from rest
    for t in range(h):
        x1_prev = x[0]
        x = abar @ x
        alpha[t] = a[0] * x1_prev + a[1:] @ x
        xc_prev = xc[:, 0].copy()
        xc = xc @ abar.T + np.outer(u_future[t], w)
        G[t] = a[0] * xc_prev + xc @ a[1:]
    return alpha, G


def _window_regression(config: ModelConfig, basis: hippo.HippoBasis,
                       kernel: hippo.BlockKernel, history: np.ndarray,
                       u_future: np.ndarray, targets: np.ndarray) -> WindowRegression | None:
    """Affine forecast pieces for every feature of one window; None if degenerate."""
    alphas, gs, ys = [], [], []
    n_feat = history.shape[1]
    for f in range(n_feat):
        try:
            if config.teacher_forcing:
                alpha, G = _teacher_forced_pieces(config, basis, history[:, f],
                                                  targets[:, f], u_future)
            else:
                state = hippo.block_step(hippo.init_state(config.order),
                                         history[:, f], kernel)
                coeffs = koopman.poly_ode_coeffs(state.c, config.extended_order)
                alpha, G = _rollout_pieces(coeffs, config, u_future)
        except koopman.DegenerateCoefficientsError:
            return None
        alphas.append(alpha)
        gs.append(G)
        ys.append(targets[:, f])
    return WindowRegression(alphas, gs, ys)


def _teacher_forced_pieces(config: ModelConfig, basis: hippo.HippoBasis,
                           history: np.ndarray, truth: np.ndarray,
                           u_future: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """One-step forecasts from histories extended with true samples."""
    h, m = u_future.shape
    alpha = np.empty(h)
    G = np.empty((h, m))
    extended = np.concatenate([history, truth])
    for t in range(h):
        state = hippo.project(basis, extended[t:t + config.seq_len])
        coeffs = koopman.poly_ode_coeffs(state.c, config.extended_order)
        one_alpha, one_g = _rollout_pieces(coeffs, config, u_future[t:t + 1])
        alpha[t] = one_alpha[0]
        G[t] = one_g[0]
    return alpha, G


def _collect_windows(config: ModelConfig, states: np.ndarray,
                     controls: np.ndarray) -> tuple[list[WindowRegression], int]:
    basis = build_basis(config)
    kernel = hippo.build_kernel(basis, config.seq_len)
    regressions: list[WindowRegression] = []
    skipped = 0
    for history, u_future, targets in window(states, controls, config.seq_len,
                                             config.horizon, config.eff_stride):
        reg = _window_regression(config, basis, kernel, history, u_future, targets)
        if reg is None:
            skipped += 1
        else:
            regressions.append(reg)
    return regressions, skipped


def window_loss_grad(alpha: np.ndarray, G: np.ndarray, y: np.ndarray,
                     b: np.ndarray) -> tuple[float, np.ndarray]:
    """MSE and its exact gradient in b for one window's affine forecast."""
    residual = alpha + G @ b - y
    loss = float(residual @ residual) / residual.size
    grad = 2.0 * (G.T @ residual) / residual.size
    return loss, grad


def mse(pred, truth) -> float:
    """Mean squared difference of two equal-length vectors."""
    pred = np.asarray(pred, dtype=float)
    truth = np.asarray(truth, dtype=float)
    if pred.shape != truth.shape or pred.size == 0:
        raise InputError(f"mse needs equal non-empty shapes, got {pred.shape} vs {truth.shape}")
    diff = pred - truth
    return float(diff.ravel() @ diff.ravel()) / diff.size


def fit(config: ModelConfig, states, controls) -> FlightKoobaModel:
    """Train per-feature control weights by minibatch gradient descent.

    Windows are precomputed once (the companion system is frozen per window),
    then each epoch shuffles them with the seeded generator and walks
    minibatches of batch_size windows. b starts at zero.
    """
    states = _as_2d(states, "states")
    controls = _as_2d(controls, "controls")
    if states.shape[0] != controls.shape[0]:
        raise InputError("states and controls are not aligned in time")
    if states.shape[0] < config.seq_len + config.horizon:
        raise InputError(f"series of {states.shape[0]} rows is shorter than "
                         f"seq_len + horizon = {config.seq_len + config.horizon}")
    if controls.shape[1] != config.controls:
        raise InputError(f"control matrix has {controls.shape[1]} columns, "
                         f"config expects {config.controls}")

    regressions, skipped = _collect_windows(config, states, controls)
    n_feat = states.shape[1]
    b = np.zeros((n_feat, config.controls))
    velocity = np.zeros_like(b)
    rng = np.random.default_rng(config.seed)
    history: list[float] = []

    if not regressions:
        log.warning("no usable training windows (%d skipped)", skipped)
        return FlightKoobaModel(config=config, b=b,
                                loss_history=[0.0] * config.epochs,
                                skipped_windows=skipped)

    for epoch in range(config.epochs):
        order = rng.permutation(len(regressions))
        epoch_loss = 0.0
        for lo in range(0, len(order), config.batch_size):
            batch = order[lo:lo + config.batch_size]
            grad = np.zeros_like(b)
            batch_loss = 0.0
            for wi in batch:
                reg = regressions[wi]
                for f in range(n_feat):
                    loss_f, grad_f = window_loss_grad(reg.alpha[f], reg.G[f],
                                                      reg.y[f], b[f])
                    batch_loss += loss_f
                    grad[f] += grad_f
            grad /= len(batch)
            batch_loss /= len(batch) * n_feat
            if not np.isfinite(batch_loss):
                raise TrainingAbortedError(
                    f"non-finite loss at epoch {epoch}, window batch starting at "
                    f"index {lo}")
            if config.momentum > 0.0:
                velocity = config.momentum * velocity - config.learning_rate * grad
                b = b + velocity
            else:
                b = b - config.learning_rate * grad
            epoch_loss += batch_loss * len(batch)
        history.append(epoch_loss / len(regressions))

    return FlightKoobaModel(config=config, b=b, loss_history=history,
                            skipped_windows=skipped)


class ClosedFormResult(NamedTuple):
    b: np.ndarray                 # (n_features, controls)
    rank_deficient: list[bool]


def closed_form_b(config: ModelConfig, states, controls) -> ClosedFormResult:
    """Least-squares control weights over all training windows (test oracle).

    Solves min_b sum_w ||alpha_w + G_w b - y_w||^2 per feature. Rank-deficient
    designs fall back to the minimum-norm solution and flag the feature.
    """
    states = _as_2d(states, "states")
    controls = _as_2d(controls, "controls")
    regressions, _ = _collect_windows(config, states, controls)
    if not regressions:
        raise InputError("no usable training windows for the least-squares oracle")
    n_feat = states.shape[1]
    b = np.empty((n_feat, config.controls))
    flags: list[bool] = []
    for f in range(n_feat):
        design = np.vstack([reg.G[f] for reg in regressions])
        rhs = np.concatenate([reg.y[f] - reg.alpha[f] for reg in regressions])
        sol, _, rank, _ = np.linalg.lstsq(design, rhs, rcond=None)
        deficient = rank < config.controls
        if deficient:
            log.warning("least-squares design for feature %d is rank deficient "
                        "(%d < %d); minimum-norm solution", f, rank, config.controls)
        b[f] = sol
        flags.append(deficient)
    return ClosedFormResult(b=b, rank_deficient=flags)


def predict(model: FlightKoobaModel, c_state: hippo.CoefficientState,
            u_future, feature: int = 0) -> np.ndarray:
    """Roll the companion system forward from a coefficient state.

    Alternates propagate and readout for one step per row of u_future.
    """
    config = model.config
    u_future = np.asarray(u_future, dtype=float)
    if u_future.size == 0:
        return np.empty(0)
    if u_future.ndim == 1:
        u_future = u_future[:, None]
    if u_future.shape[1] != config.controls:
        raise InputError(f"u_future has {u_future.shape[1]} control columns, "
                         f"config expects {config.controls}")
    if not 0 <= feature < model.n_features:
        raise InputError(f"feature index {feature} out of range")
    coeffs = koopman.poly_ode_coeffs(c_state.c, config.extended_order)
    system = koopman.build_system(coeffs, model.b[feature], config.eff_dt_system)
    state = koopman.lift_initial_state(config.order, config.s0)
    out = np.empty(u_future.shape[0])
    for t in range(u_future.shape[0]):
        state = koopman.propagate(system, state, u_future[t])
        out[t] = koopman.readout(system, state)
    return out


def evaluate(model: FlightKoobaModel, states, controls) -> dict:
    """Per-feature and mean MSE of the trained model over the given rows."""
    states = _as_2d(states, "states")
    controls = _as_2d(controls, "controls")
    regressions, skipped = _collect_windows(model.config, states, controls)
    n_feat = states.shape[1]
    if n_feat != model.n_features:
        raise InputError(f"model was trained on {model.n_features} features, "
                         f"got {n_feat}")
    if not regressions:
        raise InputError("no usable evaluation windows")
    sq_err = np.zeros(n_feat)
    count = 0
    for reg in regressions:
        for f in range(n_feat):
            residual = reg.alpha[f] + reg.G[f] @ model.b[f] - reg.y[f]
            sq_err[f] += residual @ residual
        count += reg.y[0].size
    per_feature = sq_err / count
    return {
        "per_feature": [float(v) for v in per_feature],
        "mean": float(np.mean(per_feature)),
        "windows": len(regressions),
        "skipped_windows": skipped,
    }


def save_model(model: FlightKoobaModel, path) -> None:
    """Write the model as a versioned JSON document."""
    doc = {
        "format": MODEL_FORMAT,
        "config": asdict(model.config),
        "b": model.b.tolist(),
        "loss_history": [float(v) for v in model.loss_history],
        "skipped_windows": model.skipped_windows,
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")


def load_model(path) -> FlightKoobaModel:
    """Read a model document, checking the format version."""
    with open(path, encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"model file {path} is not valid JSON "
                              f"(expected format version {MODEL_FORMAT}): {exc}") from exc
    version = doc.get("format")
    if version != MODEL_FORMAT:
        raise ConfigError(f"model file {path} has format version {version!r}, "
                          f"this build reads version {MODEL_FORMAT}")
    try:
        config = ModelConfig(**doc["config"])
        b = np.asarray(doc["b"], dtype=float)
        if b.ndim != 2:
            raise ConfigError(f"model file {path}: b must be 2-d")
        return FlightKoobaModel(config=config, b=b,
                                loss_history=[float(v) for v in doc["loss_history"]],
                                skipped_windows=int(doc["skipped_windows"]))
    except (KeyError, TypeError) as exc:
        raise ConfigError(f"model file {path} is missing fields for format "
                          f"version {MODEL_FORMAT}: {exc}") from exc
