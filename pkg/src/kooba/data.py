"""Dataset generation, CSV ingestion, normalization, and windowing."""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, InputError, NumericalError

log = logging.getLogger(__name__)

_BLOWUP_LIMIT = 1e6


@dataclass(frozen=True)
class LorenzParams:
    sigma: float = 10.0
    rho: float = 28.0
    beta: float = 8.0 / 3.0
    dt: float = 0.01
    steps: int = 15000
    x0: tuple[float, float, float] = (1.0, 1.0, 1.0)

    def __post_init__(self):
        if not 0 < self.dt <= 0.05:
            raise ConfigError(f"dt must be in (0, 0.05] for the fixed-step integrator, got {self.dt}")
        if self.steps < 1:
            raise ConfigError(f"steps must be positive, got {self.steps}")


def gen_lorenz(params: LorenzParams = LorenzParams()) -> np.ndarray:
    """Lorenz trajectory by classical fixed-step fourth-order integration.

    Returns a (steps, 3) array of (x, y, z) after each step from x0.
    """
    sigma, rho, beta, dt = params.sigma, params.rho, params.beta, params.dt

    def deriv(v):
        x, y, z = v
        return np.array([sigma * (y - x), x * (rho - z) - y, x * y - beta * z])

    out = np.empty((params.steps, 3))
    v = np.array(params.x0, dtype=float)
    for i in range(params.steps):
        k1 = deriv(v)
        k2 = deriv(v + dt / 2.0 * k1)
        k3 = deriv(v + dt / 2.0 * k2)
        k4 = deriv(v + dt * k3)
        v = v + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if not np.all(np.isfinite(v)) or np.max(np.abs(v)) > _BLOWUP_LIMIT:
            raise NumericalError(f"trajectory diverged at step {i}")
        out[i] = v
    return out


def load_csv(path) -> tuple[list[str], np.ndarray]:
    """Parse a headed CSV, keeping only numeric, non-constant columns.

    Every dropped column gets one log line. Unreadable files raise OSError;
    content problems raise InputError.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        rows = list(reader)
    if not rows:
        raise InputError(f"empty file: {path}")
    header, body = rows[0], rows[1:]
    if not body:
        raise InputError(f"no data rows in {path}")
    width = len(header)
    for i, row in enumerate(body):
        if len(row) != width:
            raise InputError(f"ragged row {i + 2} in {path}: {len(row)} fields, expected {width}")

    names: list[str] = []
    cols: list[np.ndarray] = []
    for j, name in enumerate(header):
        try:
            col = np.array([float(row[j]) for row in body])
        except ValueError:
            log.info("dropped non-numeric column %r", name)
            continue
        if np.min(col) == np.max(col):
            log.info("dropped constant column %r", name)
            continue
        names.append(name)
        cols.append(col)
    if not cols:
        raise InputError(f"no usable numeric columns in {path}")
    return names, np.column_stack(cols)


def save_csv(path, names: list[str], table: np.ndarray) -> None:
    """Write a feature table in the same schema load_csv reads."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(names)
        for row in np.asarray(table, dtype=float):
            writer.writerow([repr(float(v)) for v in row])


@dataclass(frozen=True)
class TimeSeriesDataset:
    """Feature table normalized to [0, 1] with statistics from the train split only.

    Test rows keep whatever value the train-fitted scaler gives them; values
    outside [0, 1] are not clipped.
    """
    names: list[str]
    raw: np.ndarray
    features: np.ndarray
    split_index: int
    col_min: np.ndarray
    col_max: np.ndarray

    def denormalize(self, values, col: int):
        return np.asarray(values) * (self.col_max[col] - self.col_min[col]) + self.col_min[col]


def normalize(names: list[str], table: np.ndarray, train_frac: float = 0.7) -> TimeSeriesDataset:
    """Min-max scale each column using the first train_frac rows as reference."""
    table = np.asarray(table, dtype=float)
    if table.ndim != 2 or table.shape[0] < 2:
        raise InputError(f"need a 2-d table with at least 2 rows, got shape {table.shape}")
    if len(names) != table.shape[1]:
        raise InputError(f"{len(names)} names for {table.shape[1]} columns")
    split = int(np.floor(train_frac * table.shape[0]))
    if split < 1:
        raise InputError(f"train split is empty at train_frac = {train_frac}")
    cmin = table[:split].min(axis=0)
    cmax = table[:split].max(axis=0)
    flat = np.nonzero(cmax == cmin)[0]
    if flat.size:
        raise InputError(f"constant column {names[flat[0]]!r} should have been dropped")
    features = (table - cmin) / (cmax - cmin)
    return TimeSeriesDataset(names=list(names), raw=table, features=features,
                             split_index=split, col_min=cmin, col_max=cmax)


def split_controls(dataset: TimeSeriesDataset, k: int) -> tuple[np.ndarray, np.ndarray]:
    """Last k columns become control inputs, the rest are forecast targets."""
    n_feat = dataset.features.shape[1]
    if not 1 <= k < n_feat:
        raise ConfigError(f"control count k = {k} must satisfy 1 <= k < {n_feat}")
    return dataset.features[:, : n_feat - k], dataset.features[:, n_feat - k:]


def window_count(n_rows: int, seq_len: int, horizon: int, stride: int) -> int:
    if n_rows < seq_len + horizon:
        return 0
    return (n_rows - seq_len - horizon) // stride + 1


def window(states: np.ndarray, controls: np.ndarray, seq_len: int, horizon: int,
           stride: int):
    """Yield aligned (history, future_controls, future_targets) triples.

    history is (seq_len, F_state), the futures are (horizon, ...) slices
    starting right after it. Yields nothing (with a warning) when the series
    is too short.
    """
    if seq_len < 1 or horizon < 1 or stride < 1:
        raise ConfigError(f"seq_len, horizon, stride must be positive, got "
                          f"({seq_len}, {horizon}, {stride})")
    n_rows = states.shape[0]
    if controls.shape[0] != n_rows:
        raise InputError("states and controls are not aligned in time")
    if n_rows < seq_len + horizon:
        log.warning("series of %d rows too short for seq_len %d + horizon %d",
                    n_rows, seq_len, horizon)
        return
    for start in range(0, n_rows - seq_len - horizon + 1, stride):
        mid = start + seq_len
        end = mid + horizon
        yield states[start:mid], controls[mid:end], states[mid:end]
