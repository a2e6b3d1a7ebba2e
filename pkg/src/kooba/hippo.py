"""Streaming compression of a signal into Legendre coefficients.

Two operator families are built here: "legt" keeps a sliding window of fixed
length omega, "legs" keeps the whole elapsed history with exponentially fading
resolution (recent samples sharp, old samples compressed; see
lookback_argument for the exact memory profile). Both are linear
time-invariant systems

    c'(t) = N c(t) + M gamma(t)

discretized once with the bilinear (trapezoidal) rule and then stepped as
c_{k+1} = Nbar c_k + Mbar gamma_k from a zero initial state. Block updates
batch k steps into one matrix product and are bit-equivalent to the loop.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import lu_factor, lu_solve

from .errors import ConfigError, InputError, NumericalError

_STABILITY_SLACK = 1e-6


def build_continuous(method: str, order: int, omega: float | None = None,
                     variant: str = "standard") -> tuple[np.ndarray, np.ndarray]:
    """Continuous operator pair (N, M) for the chosen family.

    variant="standard" is the default form used everywhere in this package.
    variant="scaled" selects the rescaled-coefficient forms (diagonal row
    scaling for legt, the unsigned lower-triangular matrix for legs); they are
    exposed for experimentation only and nothing downstream defaults to them.
    """
    if order < 0:
        raise ConfigError(f"order must be non-negative, got {order}")
    if variant not in ("standard", "scaled"):
        raise ConfigError(f"unknown variant {variant!r}")
    n_idx = np.arange(order + 1)

    if method == "legt":
        if omega is None or omega <= 0:
            raise ConfigError("legt needs a positive window length omega")
        rows = n_idx[:, None]
        cols = n_idx[None, :]
        if variant == "standard":
            mag = np.sqrt((2 * rows + 1) * (2 * cols + 1)).astype(float)
            m_vec = np.sqrt(2 * (2 * n_idx + 1)) / omega
        else:
            mag = np.broadcast_to((2 * rows + 1).astype(float), (order + 1, order + 1)).copy()
            m_vec = (2 * n_idx + 1).astype(float) / omega
        # below the diagonal the sign factor is 1; on and above it is (-1)^(n-k),
        # read as integer parity so k > n is well defined
        sign = np.where(cols < rows, 1.0, np.where((rows - cols) % 2 == 0, 1.0, -1.0))
        n_mat = -(mag * sign) / omega
        return n_mat, m_vec

    if method == "legs":
        if variant == "standard":
            n_mat = -np.sqrt(np.outer(2 * n_idx + 1, 2 * n_idx + 1))
            n_mat = np.tril(n_mat, -1) + np.diag(-(n_idx + 1.0))
        else:
            n_mat = np.sqrt(np.outer(2 * n_idx + 1, 2 * n_idx + 1))
            n_mat = np.tril(n_mat, -1) + np.diag(n_idx + 1.0)
        m_vec = np.sqrt(2 * (2 * n_idx + 1)).astype(float)
        return n_mat, m_vec

    raise ConfigError(f"unknown method {method!r}, expected 'legt' or 'legs'")


def discretize_bilinear(n_mat: np.ndarray, m_vec: np.ndarray,
                        dt: float) -> tuple[np.ndarray, np.ndarray]:
    """Bilinear images Nbar = (I - dt/2 N)^-1 (I + dt/2 N), Mbar = dt (I - dt/2 N)^-1 M.

    One pivoted dense factorization per call; the matrices involved are small.
    """
    if dt <= 0:
        raise ConfigError(f"step size must be positive, got {dt}")
    dim = n_mat.shape[0]
    eye = np.eye(dim)
    lhs = eye - (dt / 2.0) * n_mat
    lu, piv = lu_factor(lhs)
    diag = np.abs(np.diag(lu))
    if np.min(diag) < 1e-14 * max(np.max(diag), 1.0):
        raise NumericalError(f"bilinear solve singular at dt = {dt}")
    nbar = lu_solve((lu, piv), eye + (dt / 2.0) * n_mat)
    mbar = dt * lu_solve((lu, piv), np.asarray(m_vec, dtype=float))
    return nbar, mbar


@dataclass(frozen=True)
class HippoBasis:
    """Immutable operator bundle: continuous (N, M) plus discrete (Nbar, Mbar)."""
    method: str
    order: int
    dt: float
    omega: float | None
    N: np.ndarray
    M: np.ndarray
    Nbar: np.ndarray
    Mbar: np.ndarray


def build_basis(method: str, order: int, dt: float = 1.0, omega: float | None = None,
                variant: str = "standard") -> HippoBasis:
    """Construct and discretize a basis; asserts the update is stable.

    dt defaults to one sample period. The spectral radius of Nbar is checked
    at construction and construction fails loudly if the discrete update could
    amplify state.
    """
    n_mat, m_vec = build_continuous(method, order, omega, variant)
    nbar, mbar = discretize_bilinear(n_mat, m_vec, dt)
    radius = np.max(np.abs(np.linalg.eigvals(nbar)))
    if radius > 1.0 + _STABILITY_SLACK:
        raise NumericalError(
            f"discrete update is unstable: spectral radius {radius:.6f} "
            f"(method={method}, order={order}, dt={dt}, omega={omega}, variant={variant})")
    return HippoBasis(method=method, order=order, dt=dt, omega=omega,
                      N=n_mat, M=m_vec, Nbar=nbar, Mbar=mbar)


@dataclass(frozen=True)
class CoefficientState:
    """Coefficient vector plus how many samples produced it."""
    c: np.ndarray
    step_index: int = 0


def init_state(order: int) -> CoefficientState:
    """Zero initial state; also the warm-start entry point across windows."""
    return CoefficientState(c=np.zeros(order + 1), step_index=0)


def step(state: CoefficientState, sample: float, basis: HippoBasis) -> CoefficientState:
    """One recurrence step c' = Nbar c + Mbar * sample."""
    if not np.isfinite(sample):
        raise InputError(f"non-finite sample at step {state.step_index}")
    return CoefficientState(c=basis.Nbar @ state.c + basis.Mbar * sample,
                            step_index=state.step_index + 1)


@dataclass(frozen=True)
class BlockKernel:
    """Precomputed powers Nbar^1..Nbar^k and the stacked input map.

    input_map column j multiplies sample j of the block, so
    input_map = [Nbar^(k-1) Mbar, ..., Nbar Mbar, Mbar].
    """
    k: int
    powers: np.ndarray      # (k, dim, dim), powers[j] = Nbar^(j+1)
    input_map: np.ndarray   # (dim, k)


def build_kernel(basis: HippoBasis, k: int) -> BlockKernel:
    """Kernel for block updates of length k."""
    if k < 1:
        raise ConfigError(f"block length must be at least 1, got {k}")
    dim = basis.order + 1
    powers = np.empty((k, dim, dim))
    powers[0] = basis.Nbar
    for j in range(1, k):
        powers[j] = basis.Nbar @ powers[j - 1]
    input_map = np.empty((dim, k))
    input_map[:, k - 1] = basis.Mbar
    for j in range(k - 2, -1, -1):
        input_map[:, j] = powers[k - 2 - j] @ basis.Mbar
    return BlockKernel(k=k, powers=powers, input_map=input_map)


def block_step(state: CoefficientState, block, kernel: BlockKernel) -> CoefficientState:
    """Consume k samples at once; equivalent to k sequential step calls."""
    block = np.asarray(block, dtype=float)
    if block.shape != (kernel.k,):
        raise InputError(f"block length {block.shape} does not match kernel k = {kernel.k}")
    if not np.all(np.isfinite(block)):
        raise InputError(f"non-finite sample in block at step {state.step_index}")
    c_next = kernel.powers[kernel.k - 1] @ state.c + kernel.input_map @ block
    return CoefficientState(c=c_next, step_index=state.step_index + kernel.k)


def project(basis: HippoBasis, samples, state: CoefficientState | None = None) -> CoefficientState:
    """Stream a whole sample sequence through the recurrence."""
    if state is None:
        state = init_state(basis.order)
    for sample in np.asarray(samples, dtype=float):
        state = step(state, sample, basis)
    return state


def lookback_argument(basis: HippoBasis, age: float) -> float:
    """Canonical basis argument where a sample `age` time units old lives.

    legt represents the trailing window of length omega uniformly:
    s = 1 - 2 * age / omega. legs compresses the whole past exponentially:
    s = 2 * exp(-age) - 1, so resolution concentrates near the present edge
    and an age of ln(2/(1+s)) is needed before a query at s sees real data.
    Reconstruction of the history at that age is legendre.reconstruct(c, s).
    """
    if age < 0:
        raise InputError(f"age must be non-negative, got {age}")
    if basis.method == "legt":
        if age > basis.omega:
            raise InputError(f"age {age} is outside the window length {basis.omega}")
        return 1.0 - 2.0 * age / basis.omega
    return 2.0 * np.exp(-age) - 1.0
