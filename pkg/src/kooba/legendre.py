"""Legendre and normalized-Legendre evaluation on the canonical interval.

The basis layer for the whole package: plain Legendre values p_n(s), the
orthonormal family g_n(s) = sqrt((2n+1)/2) * p_n(s) (unit weight on [-1, 1]),
and signal reconstruction from a coefficient vector. Everything here is a pure
function of its arguments.
"""

from __future__ import annotations

import numpy as np

from .errors import InputError

# slack for arguments that land on +/-1 through floating-point maps
_DOMAIN_TOL = 1e-12


def _check_domain(s: np.ndarray) -> np.ndarray:
    s = np.asarray(s, dtype=float)
    if np.any(np.abs(s) > 1.0 + _DOMAIN_TOL):
        raise InputError(f"basis argument outside [-1, 1]: max |s| = {np.max(np.abs(s))}")
    return np.clip(s, -1.0, 1.0)


def legendre_values(order: int, s) -> np.ndarray:
    """All Legendre values p_0(s) .. p_order(s), stacked on the first axis.

    Uses the stable three-term recurrence
    (k+1) p_{k+1} = (2k+1) s p_k - k p_{k-1}.
    """
    if order < 0:
        raise InputError(f"negative polynomial order: {order}")
    s = _check_domain(s)
    out = np.empty((order + 1,) + s.shape, dtype=float)
    out[0] = 1.0
    if order >= 1:
        out[1] = s
    for k in range(1, order):
        out[k + 1] = ((2 * k + 1) * s * out[k] - k * out[k - 1]) / (k + 1)
    return out


def legendre_eval(n: int, s):
    """Legendre polynomial p_n evaluated at s in [-1, 1]."""
    values = legendre_values(n, s)[n]
    return float(values) if values.ndim == 0 else values


def normalization(order: int) -> np.ndarray:
    """Scale factors sqrt((2n+1)/2) turning p_n into the orthonormal g_n."""
    n = np.arange(order + 1)
    return np.sqrt((2 * n + 1) / 2.0)


def normalized_eval(n: int, s):
    """Orthonormal basis value g_n(s) = sqrt((2n+1)/2) * p_n(s)."""
    values = np.sqrt((2 * n + 1) / 2.0) * legendre_values(n, s)[n]
    return float(values) if values.ndim == 0 else values


def reconstruct(c, s):
    """Signal value sum_k c_k g_k(s) for a coefficient vector c."""
    c = np.asarray(c, dtype=float)
    if c.ndim != 1 or c.size == 0:
        raise InputError("coefficient vector must be a non-empty 1-d array")
    order = c.size - 1
    values = legendre_values(order, s)
    scaled = c * normalization(order)
    out = np.tensordot(scaled, values, axes=(0, 0))
    return float(out) if out.ndim == 0 else out


def gauss_legendre_rule(npts: int) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre nodes and weights on [-1, 1], exact to degree 2*npts - 1."""
    if npts < 1:
        raise InputError(f"quadrature needs at least one node, got {npts}")
    return np.polynomial.legendre.leggauss(npts)
