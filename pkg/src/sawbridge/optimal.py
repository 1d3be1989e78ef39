"""Exact entropy-distortion tradeoff of the source and its interval encoders.

The best one-shot encoder at mean squared error ``delta < 1/6`` partitions the
jump time into ``m`` cells of a common width ``p`` plus one remainder cell of
width ``q = 1 - m*p``, where ``m = floor(1/p)`` and ``p`` solves
``m p^2 + q^2 = 6 delta``.  Output entropy is then ``-m p log2 p - q log2 q``.
For each candidate ``m`` the constraint is a quadratic in ``p`` with exactly
one root in the bracket ``[1/(m+1), 1/m]``, and the correct ``m`` is
``floor(1/(6 delta))``, so the whole curve is closed form.

The curve touches its lower convex envelope exactly at the equal-cell points
``(1/(6M), log2 M)``, which is where Lagrangian-trained codes settle.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .process import grid_points
from .validation import check_positive_int, check_unit_interval

__all__ = [
    "DISTORTION_CEILING",
    "OptimalQuantizer",
    "EntropyDistortionPoint",
    "optimal_quantizer",
    "entropy_distortion",
    "lce_entropy_distortion",
    "interval_encode",
    "conditional_mean_decode",
    "interval_encoder_distortion",
    "lagrangian_kink",
    "kink_lambda",
]

# Above this distortion the zero-rate encoder suffices (source energy 1/6).
DISTORTION_CEILING = 1.0 / 6.0


@dataclass(frozen=True)
class OptimalQuantizer:
    """Cell structure of the optimal encoder: m full cells plus a remainder."""

    m: int
    p: float
    q: float

    @property
    def boundaries(self) -> np.ndarray:
        return np.concatenate([np.arange(self.m + 1) * self.p, [1.0]])

    @property
    def distortion(self) -> float:
        return (self.m * self.p**2 + self.q**2) / 6.0

    @property
    def entropy_bits(self) -> float:
        return -self.m * _plog2p(self.p) - _plog2p(self.q)


@dataclass(frozen=True)
class EntropyDistortionPoint:
    """A point on an entropy-distortion plot with provenance."""

    entropy_bits: float
    distortion: float
    provenance: str  # analytic | lce | empirical | bound

    def __post_init__(self):
        if self.entropy_bits < 0 or self.distortion < 0:
            raise ValueError("entropy and distortion must be nonnegative")
        if self.provenance not in ("analytic", "lce", "empirical", "bound"):
            raise ValueError(f"unknown provenance {self.provenance!r}")


def _plog2p(p: float) -> float:
    return 0.0 if p <= 0.0 else p * math.log2(p)


def _check_delta(delta: float) -> float:
    delta = float(delta)
    if not delta > 0.0 or not math.isfinite(delta):
        raise ValueError(f"delta must be positive, got {delta!r}")
    return delta


def optimal_quantizer(delta: float) -> OptimalQuantizer:
    """Cell widths of the entropy-minimizing encoder at distortion ``delta``.

    Requires ``0 < delta < 1/6``; above the ceiling the trivial single-cell
    encoder is optimal and there is no nondegenerate structure to return.
    """
    delta = _check_delta(delta)
    if delta >= DISTORTION_CEILING:
        raise ValueError("delta >= 1/6 is met by the zero-rate encoder")
    six_d = 6.0 * delta
    m = int(math.floor(1.0 / six_d))
    # Root of m p^2 + (1 - m p)^2 = 6 delta inside [1/(m+1), 1/m].  The
    # discriminant is exactly zero at the bracket's lower edge; clip the tiny
    # negative values float rounding can produce there.
    r = max((six_d * (m + 1) - 1.0) / m, 0.0)
    p = (1.0 + math.sqrt(r)) / (m + 1)
    q = 1.0 - m * p
    if q < 0.0:  # float dust when 1/p is integral
        q = 0.0
    return OptimalQuantizer(m=m, p=p, q=q)


def entropy_distortion(delta: float) -> float:
    """Minimum output entropy (bits) over encoders with MSE at most ``delta``."""
    delta = _check_delta(delta)
    if delta >= DISTORTION_CEILING:
        return 0.0
    return optimal_quantizer(delta).entropy_bits


def lce_entropy_distortion(delta: float) -> float:
    """Lower convex envelope of the tradeoff, in bits.

    Piecewise-linear through the equal-cell points (1/(6M), log2 M); this is
    the tradeoff achieved by randomized (time-shared) encoders.
    """
    delta = _check_delta(delta)
    if delta >= DISTORTION_CEILING:
        return 0.0
    m = int(math.floor(1.0 / (6.0 * delta)))
    d_hi = 1.0 / (6.0 * m)        # kink at M = m (larger distortion)
    d_lo = 1.0 / (6.0 * (m + 1))  # kink at M = m + 1
    w = (d_hi - delta) / (d_hi - d_lo)
    return (1.0 - w) * math.log2(m) + w * math.log2(m + 1)


def interval_encode(u: float, cells: int) -> int:
    """Quantize a jump time to one of ``cells`` equal intervals."""
    cells = check_positive_int(cells, "cells")
    u = check_unit_interval(u, "u")
    return min(int(u * cells), cells - 1)


def conditional_mean_decode(a: float, b: float, n: int) -> np.ndarray:
    """Best reproduction given the jump time lies in [a, b].

    E[X(t) | U in [a, b]] = t - clamp((t - a)/(b - a), 0, 1), sampled on the
    n-point grid.
    """
    a = check_unit_interval(a, "a")
    b = check_unit_interval(b, "b")
    if a >= b:
        raise ValueError(f"need a < b, got a={a}, b={b}")
    t = grid_points(n)
    return t - np.clip((t - a) / (b - a), 0.0, 1.0)


def interval_encoder_distortion(cells: int) -> float:
    """Exact MSE of the uniform encoder with ``cells`` cells: 1/(6*cells)."""
    cells = check_positive_int(cells, "cells")
    return 1.0 / (6.0 * cells)


def _segment_slope(m: int) -> float:
    """Magnitude of the envelope slope between kinks M = m and m + 1."""
    return 6.0 * m * (m + 1) * math.log2((m + 1) / m)


def lagrangian_kink(lam: float) -> int:
    """Equal-cell count minimizing log2 M + lam * 1/(6M) over the envelope.

    The envelope is piecewise linear, so the Lagrangian minimum always sits at
    a kink: the M whose adjacent segment slopes bracket ``lam``.
    """
    if lam <= 0.0:
        raise ValueError("lam must be positive")
    if lam <= _segment_slope(1):
        return 1
    # slopes grow like 6M/ln 2, so this lands within a step or two of the kink
    m = max(1, int(lam * math.log(2) / 6.0) - 2)
    while _segment_slope(m) < lam:
        m += 1
    while m > 1 and _segment_slope(m - 1) >= lam:
        m -= 1
    return m


def kink_lambda(m: int) -> float:
    """A multiplier whose Lagrangian optimum is the M = m kink.

    Geometric mean of the adjacent envelope slopes; for m = 1 the envelope is
    flat to the right, so the left slope alone is scaled down instead.
    """
    m = check_positive_int(m, "m")
    if m == 1:
        return 0.5 * _segment_slope(1)
    return math.sqrt(_segment_slope(m - 1) * _segment_slope(m))
