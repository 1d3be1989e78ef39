"""Factorized entropy model over integer bins, parameterized by logits.

One logit vector per latent dimension over the bins -B .. B; bin masses are
the softmax of the logits, so they are positive and sum to one by
construction.  Total rate of a quantized vector is the sum of per-dimension
code lengths -log2 p_d(q_d).
"""

from __future__ import annotations

import numpy as np

from .validation import check_positive_int

__all__ = ["FactorizedEntropyModel"]


class FactorizedEntropyModel:
    def __init__(self, dims: int, support: int = 64, init_slope: float = 0.25):
        """Start from a broad triangular logit profile peaked at zero.

        ``support`` is the half-width B; quantized values are expected in
        [-B, B].  ``init_slope`` sets how fast the initial masses decay away
        from zero.
        """
        dims = check_positive_int(dims, "dims")
        support = check_positive_int(support, "support")
        centers = np.arange(-support, support + 1, dtype=np.float64)
        profile = -init_slope * np.abs(centers)
        self.support = support
        self.logits = np.tile(profile, (dims, 1))

    @property
    def dims(self) -> int:
        return self.logits.shape[0]

    @property
    def bin_centers(self) -> np.ndarray:
        return np.arange(-self.support, self.support + 1)

    def pmf(self) -> np.ndarray:
        shifted = self.logits - self.logits.max(axis=1, keepdims=True)
        expd = np.exp(shifted)
        return expd / expd.sum(axis=1, keepdims=True)

    def log2_pmf(self) -> np.ndarray:
        shifted = self.logits - self.logits.max(axis=1, keepdims=True)
        log_norm = np.log(np.exp(shifted).sum(axis=1, keepdims=True))
        return (shifted - log_norm) / np.log(2.0)

    def bits(self, q: np.ndarray) -> np.ndarray:
        """Per-sample total code length (bits) for integer latents (batch, dims)."""
        q = np.asarray(q)
        if q.ndim != 2 or q.shape[1] != self.dims:
            raise ValueError(f"expected shape (batch, {self.dims}), got {q.shape}")
        if np.abs(q).max(initial=0) > self.support:
            raise ValueError("quantized values outside model support")
        table = -self.log2_pmf()
        cols = q.astype(np.int64) + self.support
        return table[np.arange(self.dims)[None, :], cols].sum(axis=1)

    def fit_histogram(self, q: np.ndarray, floor: float = 1e-9) -> "FactorizedEntropyModel":
        """Set the masses to the empirical frequencies of integer latents.

        A small floor keeps unseen bins at finite code length.
        """
        q = np.asarray(q, dtype=np.int64)
        if q.ndim != 2 or q.shape[1] != self.dims:
            raise ValueError(f"expected shape (batch, {self.dims}), got {q.shape}")
        bins = 2 * self.support + 1
        with np.errstate(divide="ignore"):
            for dim in range(self.dims):
                counts = np.bincount(q[:, dim] + self.support, minlength=bins)
                freq = counts / counts.sum() + floor
                self.logits[dim] = np.log(freq)
        return self
