"""The sawbridge source on a midpoint grid, plus its analytic KLT machinery.

The process jumps from the rail ``t`` down to ``t - 1`` at a uniform random
time ``u``.  Signals are represented as plain 1-D float arrays sampled at the
midpoint grid ``t_i = (i + 1/2) / n``; inner products are midpoint sums
``(1/n) * sum(x * y)``, which approximate the corresponding integrals on
[0, 1].  The midpoint convention avoids the degenerate endpoints t = 0, 1 and
keeps quadrature second-order for smooth integrands.

The autocorrelation ``min(s, t) - s*t`` admits a closed-form eigensystem:
scaled sines with eigenvalues ``1 / (pi^2 k^2)``.  Everything here is a pure
function of its arguments and safe for concurrent use.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import polygamma

from .validation import check_positive_int, check_signal, check_unit_interval

__all__ = [
    "grid_points",
    "sample_sawbridge",
    "sample_sawbridge_batch",
    "autocorrelation",
    "eigenvalue",
    "eigenvalues",
    "eigenvalue_tail",
    "KltBasis",
    "klt_basis",
    "klt_coefficient_analytic",
    "klt_coefficients_analytic",
    "klt_coefficient_numeric",
    "klt_reconstruct",
    "SOURCE_ENERGY",
]

# Total expected signal energy E[int X(t)^2 dt] = int t(1-t) dt.
SOURCE_ENERGY = 1.0 / 6.0


def grid_points(n: int) -> np.ndarray:
    """Midpoint grid t_i = (i + 1/2)/n on [0, 1]."""
    n = check_positive_int(n, "n")
    return (np.arange(n) + 0.5) / n


def sample_sawbridge(u: float, n: int) -> np.ndarray:
    """Evaluate the realization with jump time ``u`` on the n-point grid."""
    u = check_unit_interval(u, "u")
    t = grid_points(n)
    return t - (t >= u)


def sample_sawbridge_batch(u, n: int) -> np.ndarray:
    """Realizations for a vector of jump times, one per row."""
    u = np.asarray(u, dtype=np.float64)
    if u.ndim != 1:
        raise ValueError("u must be 1-D")
    if u.size and (u.min() < 0.0 or u.max() > 1.0):
        raise ValueError("jump times must lie in [0, 1]")
    t = grid_points(n)
    return t[None, :] - (t[None, :] >= u[:, None])


def autocorrelation(s, t):
    """E[X(s) X(t)] = min(s, t) - s*t for s, t in [0, 1]."""
    s = np.asarray(s, dtype=np.float64)
    t = np.asarray(t, dtype=np.float64)
    if np.any(s < 0) or np.any(s > 1) or np.any(t < 0) or np.any(t > 1):
        raise ValueError("autocorrelation arguments must lie in [0, 1]")
    out = np.minimum(s, t) - s * t
    return float(out) if out.ndim == 0 else out


def eigenvalue(k: int) -> float:
    """k-th autocorrelation eigenvalue, 1 / (pi^2 k^2)."""
    k = check_positive_int(k, "k")
    return 1.0 / (np.pi**2 * k**2)


def eigenvalues(k_max: int) -> np.ndarray:
    k_max = check_positive_int(k_max, "k_max")
    k = np.arange(1, k_max + 1, dtype=np.float64)
    return 1.0 / (np.pi**2 * k**2)


def eigenvalue_tail(k_max: int) -> float:
    """Exact tail energy sum_{k > k_max} 1/(pi^2 k^2), via the trigamma function."""
    k_max = check_positive_int(k_max, "k_max")
    return float(polygamma(1, k_max + 1)) / np.pi**2


@dataclass(frozen=True)
class KltBasis:
    """Eigenfunctions sqrt(2) sin(pi k t) evaluated on the midpoint grid.

    ``functions[k-1]`` holds the k-th eigenfunction; rows have unit grid norm
    (exactly, for k < n) and the grid Gram matrix is the identity.
    """

    k_max: int
    n: int
    eigenvalues: np.ndarray = field(repr=False)
    functions: np.ndarray = field(repr=False)  # shape (k_max, n)


def klt_basis(k_max: int = 64, n: int = 1024) -> KltBasis:
    k_max = check_positive_int(k_max, "k_max")
    n = check_positive_int(n, "n")
    t = grid_points(n)
    k = np.arange(1, k_max + 1, dtype=np.float64)
    functions = np.sqrt(2.0) * np.sin(np.pi * np.outer(k, t))
    return KltBasis(k_max=k_max, n=n, eigenvalues=eigenvalues(k_max), functions=functions)


def klt_coefficient_analytic(k: int, u: float) -> float:
    """Closed-form KLT coefficient of the realization with jump time ``u``."""
    k = check_positive_int(k, "k")
    u = check_unit_interval(u, "u")
    lam = eigenvalue(k)
    return float(-np.sqrt(2.0 * lam) * np.cos(np.pi * k * u))


def klt_coefficients_analytic(u, k_max: int) -> np.ndarray:
    """First ``k_max`` coefficients for scalar or vector jump times.

    Returns shape (k_max,) for scalar ``u`` and (len(u), k_max) otherwise.
    """
    k_max = check_positive_int(k_max, "k_max")
    u_arr = np.atleast_1d(np.asarray(u, dtype=np.float64))
    if u_arr.size and (u_arr.min() < 0.0 or u_arr.max() > 1.0):
        raise ValueError("jump times must lie in [0, 1]")
    k = np.arange(1, k_max + 1, dtype=np.float64)
    amp = np.sqrt(2.0) / (np.pi * k)
    coeffs = -amp[None, :] * np.cos(np.pi * np.outer(u_arr, k))
    return coeffs[0] if np.ndim(u) == 0 else coeffs


def klt_coefficient_numeric(values, k: int) -> float:
    """Midpoint-quadrature coefficient (1/n) sum x_i phi_k(t_i).

    For a sawbridge realization this agrees with the analytic coefficient
    within 2*pi*k/n (the jump integrand's quadrature error bound).
    """
    k = check_positive_int(k, "k")
    x = check_signal(values)
    n = x.size
    phi = np.sqrt(2.0) * np.sin(np.pi * k * grid_points(n))
    return float(np.dot(x, phi) / n)


def klt_reconstruct(coeffs, basis: KltBasis) -> np.ndarray:
    """Partial-sum reconstruction sum_k Y_k phi_k on the basis grid."""
    c = np.asarray(coeffs, dtype=np.float64)
    if c.ndim != 1:
        raise ValueError("coeffs must be 1-D")
    if c.size > basis.k_max:
        raise ValueError(f"got {c.size} coefficients but basis holds {basis.k_max}")
    if not np.all(np.isfinite(c)):
        raise ValueError("coefficients contain non-finite values")
    return c @ basis.functions[: c.size]
