"""Companion-form state space built from Legendre coefficients.

The coefficient vector of a projected window is rescaled into the
coefficients a_0..a_n of a scalar linear ODE; that ODE's companion matrix A
propagates a lifted state holding the window polynomial's value and
derivative stack, while a rank-one control matrix B = B_base b^T injects
exogenous inputs. The assembled block operator K = [[A, B], [0, 0]] advances
(state; controls) jointly.

Convention note: the derivative stack follows the rescaled chain rule
d/ds p_n = n * p_{n-1} used consistently by the coefficient transform below,
not the classical Legendre derivative identity. The two definitions are used
together and cancel; see lift_initial_state and poly_ode_coeffs.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import lgamma, exp, isfinite

import numpy as np
from scipy.linalg import lu_factor, lu_solve

from .errors import ConfigError, DegenerateCoefficientsError, InputError, NumericalError
from .legendre import legendre_values

# double-precision factorials are exact only up to about 32!; beyond that the
# rescaling products silently lose integer precision
MAX_DIRECT_ORDER = 32
MAX_EXTENDED_ORDER = 64
DEGENERATE_TOL = 1e-12
_LOG_DOMAIN_FROM = 20


@dataclass(frozen=True)
class PolyODECoeffs:
    """Scalar-ODE coefficients a_0..a_n recovered from a coefficient vector."""
    a: np.ndarray
    order: int


def check_order(order: int, extended: bool = False) -> None:
    """Reject orders whose factorial-sized rescaling exceeds float precision."""
    if order > MAX_EXTENDED_ORDER:
        raise ConfigError(f"order {order} beyond the supported range ({MAX_EXTENDED_ORDER})")
    if order > MAX_DIRECT_ORDER and not extended:
        raise ConfigError(
            f"order {order} needs factorial products beyond exact double precision "
            f"(factorials are exactly representable only up to about {MAX_DIRECT_ORDER}!); "
            f"enable extended_order to run log-domain products up to {MAX_EXTENDED_ORDER}")


def poly_ode_coeffs(c, extended: bool = False,
                    require_leading: bool = True) -> PolyODECoeffs:
    """Rescale projection coefficients c_0..c_n into ODE coefficients a_0..a_n.

    a_{n-k} = sqrt((2k+1)/2) * c_k / (n * (n-1) * ... * (k+1)), with the empty
    product equal to 1. The falling products run in the log domain above order
    20 to keep them finite and accurate. By default a vanishing leading
    coefficient raises (the companion matrix downstream would be undefined);
    require_leading=False returns the raw transform for inspection.
    """
    c = np.asarray(c, dtype=float)
    if c.ndim != 1 or c.size == 0:
        raise InputError("coefficient vector must be a non-empty 1-d array")
    n = c.size - 1
    check_order(n, extended)
    scale = np.sqrt((2 * np.arange(n + 1) + 1) / 2.0)
    a = np.empty(n + 1)
    if n <= _LOG_DOMAIN_FROM:
        prod = 1.0
        a[0] = scale[n] * c[n]
        for k in range(n - 1, -1, -1):
            prod *= k + 1                      # running product (k+1)...(n)
            a[n - k] = scale[k] * c[k] / prod
    else:
        lg_n = lgamma(n + 1)
        for k in range(n + 1):
            a[n - k] = scale[k] * c[k] * exp(lgamma(k + 1) - lg_n)
    if not np.all(np.isfinite(a)):
        raise NumericalError("non-finite ODE coefficients")
    if require_leading and abs(a[n]) < DEGENERATE_TOL:
        raise DegenerateCoefficientsError(
            f"leading coefficient a_n = {a[n]:.3e} below {DEGENERATE_TOL}; "
            f"companion matrix undefined for this window")
    return PolyODECoeffs(a=a, order=n)


def build_companion(coeffs: PolyODECoeffs) -> tuple[np.ndarray, np.ndarray]:
    """Companion matrix A and base input column B_base = (0, ..., 0, 1/a_n)."""
    n = coeffs.order
    a = coeffs.a
    if n == 0:
        raise ConfigError("order 0 is unsupported: the state vector would be empty")
    if abs(a[n]) < DEGENERATE_TOL:
        raise DegenerateCoefficientsError(f"leading coefficient a_n = {a[n]:.3e}")
    A = np.zeros((n, n))
    for i in range(n - 1):
        A[i, i + 1] = 1.0
    A[n - 1, :] = -a[:n] / a[n]
    b_base = np.zeros(n)
    b_base[n - 1] = 1.0 / a[n]
    return A, b_base


def expand_controls(b_base: np.ndarray, b) -> np.ndarray:
    """Control matrix B = B_base b^T; only the last row is nonzero."""
    b = np.atleast_1d(np.asarray(b, dtype=float))
    if b.size == 0:
        raise ConfigError("control weight vector must not be empty")
    return np.outer(b_base, b)


def assemble_operator(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    """Block operator K = [[A, B], [0, 0]] advancing (state; controls)."""
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise InputError(f"A must be square, got {A.shape}")
    if B.ndim != 2 or B.shape[0] != A.shape[0]:
        raise InputError(f"B rows {B.shape} do not match A {A.shape}")
    n, m = B.shape
    K = np.zeros((n + m, n + m))
    K[:n, :n] = A
    K[:n, n:] = B
    return K


@dataclass(frozen=True)
class LiftedState:
    """Polynomial value/derivative stack plus the retained previous first entry."""
    x: np.ndarray
    x1_prev: float


def lift_initial_state(order: int, s0: float = 1.0) -> LiftedState:
    """Lifted state at basis argument s0 (default: the window's present edge).

    Entry j holds the falling product n * (n-1) * ... * (n-j+2) times
    p_{n-j+1}(s0), the derivative stack under the same rescaled chain rule the
    coefficient transform assumes.
    """
    if order < 1:
        raise ConfigError("order 0 is unsupported: the state vector would be empty")
    p = legendre_values(order, s0)
    x = np.empty(order)
    prefactor = 1.0
    for j in range(1, order + 1):
        x[j - 1] = prefactor * p[order - j + 1]
        prefactor *= order - j + 1
    return LiftedState(x=x, x1_prev=float(x[0]))


@dataclass(frozen=True)
class KoopmanSystem:
    """Companion system with its bilinear discretization at step dt.

    Discrete update: x' = Abar x + w * (b . u), i.e. the discrete control
    matrix is the outer product of w with the trainable weights b.
    """
    coeffs: PolyODECoeffs
    A: np.ndarray
    B_base: np.ndarray
    b: np.ndarray
    B: np.ndarray
    K: np.ndarray
    dt: float
    Abar: np.ndarray
    w: np.ndarray


def companion_discrete(coeffs: PolyODECoeffs, dt: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Control-independent discrete pieces (A, Abar, w) of the companion system."""
    if dt <= 0:
        raise ConfigError(f"step size must be positive, got {dt}")
    A, b_base = build_companion(coeffs)
    n = coeffs.order
    eye = np.eye(n)
    lu, piv = lu_factor(eye - (dt / 2.0) * A)
    diag = np.abs(np.diag(lu))
    if np.min(diag) < 1e-14 * max(np.max(diag), 1.0):
        raise NumericalError(f"bilinear solve singular at dt = {dt}")
    abar = lu_solve((lu, piv), eye + (dt / 2.0) * A)
    w = dt * lu_solve((lu, piv), b_base)
    return A, abar, w


def build_system(coeffs: PolyODECoeffs, b, dt: float) -> KoopmanSystem:
    """Assemble the full system around trained control weights b."""
    b = np.atleast_1d(np.asarray(b, dtype=float))
    A, abar, w = companion_discrete(coeffs, dt)
    _, b_base = build_companion(coeffs)
    B = expand_controls(b_base, b)
    K = assemble_operator(A, B)
    return KoopmanSystem(coeffs=coeffs, A=A, B_base=b_base, b=b, B=B, K=K,
                         dt=dt, Abar=abar, w=w)


def propagate(sys: KoopmanSystem, state: LiftedState, u) -> LiftedState:
    """One discrete step; the pre-step first entry is retained for readout."""
    u = np.atleast_1d(np.asarray(u, dtype=float))
    if u.shape != sys.b.shape:
        raise InputError(f"control input shape {u.shape} does not match weights {sys.b.shape}")
    if not np.all(np.isfinite(u)):
        raise InputError("non-finite control input")
    x1_prev = float(state.x[0])
    x_next = sys.Abar @ state.x + sys.w * float(sys.b @ u)
    return LiftedState(x=x_next, x1_prev=x1_prev)


def readout(sys: KoopmanSystem, state: LiftedState) -> float:
    """Forecast value a_0 * x1_prev + sum_i a_i * x_i."""
    a = sys.coeffs.a
    if a.size != state.x.size + 1:
        raise InputError(f"coefficient length {a.size} does not match state {state.x.size}")
    value = a[0] * state.x1_prev + float(a[1:] @ state.x)
    if not isfinite(value):
        raise NumericalError("non-finite readout")
    return value
