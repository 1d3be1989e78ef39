"""Fixed orthonormal bases on the midpoint grid.

All bases are returned as (d, n) matrices whose rows have unit grid norm and
are mutually orthogonal under the grid inner product (1/n) sum x_i y_i, i.e.
(1/n) B B^T = I.  Analysis is then ``(1/n) B x`` and synthesis ``B^T c``,
which makes coefficient-domain squared error equal to grid MSE.

Rows are ordered coarse to fine: DCT by frequency, the wavelet by scale with
the scaling function first, and the sampled sine basis by wavenumber.
"""

from __future__ import annotations

import math

import numpy as np

from .process import grid_points
from .validation import check_positive_int

__all__ = ["orthonormal_basis", "dct2_basis", "daub4_basis", "klt_sampled_basis", "BASIS_KINDS"]

BASIS_KINDS = ("dct2", "daub4", "klt-sampled")


def dct2_basis(n: int, d: int | None = None) -> np.ndarray:
    """First ``d`` rows of the DCT-II basis: 1, sqrt(2) cos(pi k t_i)."""
    n, d = _check_dims(n, d)
    t = grid_points(n)
    k = np.arange(d, dtype=np.float64)
    rows = np.sqrt(2.0) * np.cos(np.pi * np.outer(k, t))
    rows[0] = 1.0
    return rows


def klt_sampled_basis(n: int, d: int | None = None) -> np.ndarray:
    """First ``d`` sampled eigenfunctions sqrt(2) sin(pi k t_i), renormalized.

    On the midpoint grid the sampled sines are already grid-orthogonal; the
    renormalization only matters for the k = n row, whose grid norm is sqrt(2).
    """
    n, d = _check_dims(n, d)
    t = grid_points(n)
    k = np.arange(1, d + 1, dtype=np.float64)
    rows = np.sqrt(2.0) * np.sin(np.pi * np.outer(k, t))
    norms = np.sqrt(np.mean(rows**2, axis=1))
    return rows / norms[:, None]


def daub4_basis(n: int, d: int | None = None) -> np.ndarray:
    """First ``d`` rows of the periodic Daubechies 4-tap wavelet basis.

    Full-depth cascade with periodic wrapping; requires ``n`` to be a power
    of two.  Row order: scaling function, then detail bands coarsest first.
    """
    n, d = _check_dims(n, d)
    if n & (n - 1):
        raise ValueError(f"daub4 requires a power-of-two grid, got n={n}")
    s3 = math.sqrt(3.0)
    h = np.array([1.0 + s3, 3.0 + s3, 3.0 - s3, 1.0 - s3]) / (4.0 * math.sqrt(2.0))
    g = np.array([h[3], -h[2], h[1], -h[0]])

    approx = np.eye(n)
    details = []
    m = n
    while m >= 2:
        lo = np.zeros((m // 2, m))
        hi = np.zeros((m // 2, m))
        for j in range(4):
            cols = (2 * np.arange(m // 2) + j) % m
            lo[np.arange(m // 2), cols] += h[j]
            hi[np.arange(m // 2), cols] += g[j]
        details.append(hi @ approx)
        approx = lo @ approx
        m //= 2
    rows = np.vstack([approx] + details[::-1])
    # Cascade is Euclidean-orthonormal; rescale rows to unit grid norm.
    return math.sqrt(n) * rows[:d]


def orthonormal_basis(kind: str, n: int, d: int | None = None) -> np.ndarray:
    """Dispatch on basis kind; see module docstring for conventions."""
    if kind == "dct2":
        return dct2_basis(n, d)
    if kind == "daub4":
        return daub4_basis(n, d)
    if kind == "klt-sampled":
        return klt_sampled_basis(n, d)
    raise ValueError(f"unknown basis kind {kind!r}; expected one of {BASIS_KINDS}")


def _check_dims(n: int, d: int | None) -> tuple[int, int]:
    n = check_positive_int(n, "n")
    d = n if d is None else check_positive_int(d, "d")
    if d > n:
        raise ValueError(f"latent dimension d={d} exceeds grid size n={n}")
    return n, d
