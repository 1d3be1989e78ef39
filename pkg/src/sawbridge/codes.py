"""Transform-code estimators: analysis, uniform quantization, factorized rate.

Every family follows the same pipeline: analysis map -> round-to-even scalar
quantization (step 1; effective step sizes are learned by scaling) ->
factorized entropy model -> synthesis map.  Families differ only in the maps:

* ``FixedOrthonormalCode`` — a fixed orthonormal basis (DCT-II, periodic
  Daubechies-4, or the sampled source eigenbasis) composed with a trainable
  diagonal scaling.
* ``LinearCode`` — one trainable affine layer each way.
* ``NeuralCode`` — leaky-ReLU MLPs, by default three layers of 100 units;
  depth 1 on either side degenerates to the linear case, which is how the
  hybrid (linear analysis, nonlinear synthesis) variant is expressed.

The classes are sklearn-style estimators: hyperparameters in ``__init__``,
training in ``fit`` (fresh source draws per batch, or minibatches from a
provided pool), ``transform``/``inverse_transform`` for coding, and
``get_params``/``set_params`` inherited from ``BaseEstimator``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from .autodiff import Tensor
from .entropy_model import FactorizedEntropyModel
from .process import sample_sawbridge_batch
from .rng import shard_sizes, substream
from .training import (
    AffineStack,
    DiagonalScaledBasis,
    TrainConfig,
    hard_rate_distortion,
    train_code,
)
from .transforms import orthonormal_basis
from .validation import check_is_fitted, check_realizations

__all__ = [
    "CodeEvaluation",
    "quantize",
    "evaluate_maps",
    "latent_entropies",
    "FixedOrthonormalCode",
    "LinearCode",
    "NeuralCode",
    "ACTIVE_DIMENSION_THRESHOLD_BITS",
]

# A latent dimension is "active" when its quantized entropy exceeds this.
ACTIVE_DIMENSION_THRESHOLD_BITS = 0.01


@dataclass(frozen=True)
class CodeEvaluation:
    """Empirical cross-entropy rate and grid MSE of a code."""

    entropy_bits: float
    distortion: float
    n_samples: int
    clamp_count: int


def quantize(latents, support: int | None = None):
    """Round-to-even integer quantization with optional support clamping.

    Returns (quantized array, clamp count).  Values beyond ``support`` are
    clamped and counted rather than rejected.
    """
    q = np.round(np.asarray(latents, dtype=np.float64))
    if not np.all(np.isfinite(q)):
        raise ValueError("latents contain non-finite values")
    clamped = 0
    if support is not None:
        clamped = int((np.abs(q) > support).sum())
        q = np.clip(q, -support, support)
    return q, clamped


def evaluate_maps(
    analysis_np,
    synthesis_np,
    model: FactorizedEntropyModel,
    grid_size: int,
    n_samples: int,
    seed: int,
    shard: int = 8192,
) -> CodeEvaluation:
    """Monte Carlo rate/distortion of arbitrary analysis/synthesis maps.

    Draws jump times from a seeded substream in fixed-size shards, so the
    result is independent of any outer parallelism.
    """
    if n_samples < 1:
        raise ValueError("n_samples must be positive")
    bits_total = 0.0
    mse_total = 0.0
    clamp_total = 0
    for idx, m in enumerate(shard_sizes(n_samples, shard)):
        u = substream(seed, "eval-u", idx).uniform(size=m)
        batch = sample_sawbridge_batch(u, grid_size)
        bits, mse, clamped = hard_rate_distortion(analysis_np, synthesis_np, model, batch)
        bits_total += bits * m
        mse_total += mse * m
        clamp_total += clamped
    return CodeEvaluation(
        entropy_bits=bits_total / n_samples,
        distortion=mse_total / n_samples,
        n_samples=n_samples,
        clamp_count=clamp_total,
    )


def latent_entropies(
    analysis_np,
    support: int,
    grid_size: int,
    n_samples: int,
    seed: int,
    shard: int = 8192,
) -> np.ndarray:
    """Per-dimension empirical entropy (bits) of the quantized latents."""
    counts = None
    for idx, m in enumerate(shard_sizes(n_samples, shard)):
        u = substream(seed, "eval-u", idx).uniform(size=m)
        q, _ = quantize(analysis_np(sample_sawbridge_batch(u, grid_size)), support)
        q = q.astype(np.int64) + support
        if counts is None:
            counts = np.zeros((q.shape[1], 2 * support + 1), dtype=np.int64)
        for dim in range(q.shape[1]):
            counts[dim] += np.bincount(q[:, dim], minlength=2 * support + 1)
    pmf = counts / counts.sum(axis=1, keepdims=True)
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(pmf > 0, pmf * np.log2(pmf), 0.0)
    return -terms.sum(axis=1)


class _TrainableCode(BaseEstimator, TransformerMixin):
    """Shared fit/transform plumbing; subclasses build the maps."""

    def _build(self):  # -> (analysis, synthesis, analysis_np, synthesis_np, params)
        raise NotImplementedError

    def family_tag(self) -> str:
        raise NotImplementedError

    def _latent_dims(self) -> int:
        return self.latent_dims

    def _train_config(self) -> TrainConfig:
        return TrainConfig(
            lam=self.lam,
            steps=self.steps,
            batch_size=self.batch_size,
            learning_rate=self.learning_rate,
            logit_lr_scale=self.logit_lr_scale,
            seed=self.seed,
            latent_dims=self._latent_dims(),
            grid_size=self.grid_size,
            leaky_alpha=getattr(self, "alpha", 0.01),
            support=self.support,
            eval_every=self.eval_every,
        )

    def fit(self, X=None, y=None):
        """Train by SGD on the Lagrangian.

        With ``X=None`` (the usual mode) every batch draws fresh jump times
        from the seeded source stream; with a pool of realizations ``X``,
        minibatches are resampled from its rows instead.
        """
        pool = None if X is None else check_realizations(X, self.grid_size)
        analysis, synthesis, analysis_np, synthesis_np, params = self._build()
        model = FactorizedEntropyModel(
            self._latent_dims(), support=self.support, init_slope=self.init_logit_slope
        )
        logits = Tensor(model.logits, requires_grad=True)
        config = self._train_config()
        trace, stats = train_code(
            analysis, synthesis, analysis_np, synthesis_np,
            params, model, logits, config, pool=pool,
        )
        self.entropy_model_ = model
        self._analysis_np = analysis_np
        self._synthesis_np = synthesis_np
        self.trace_ = trace
        self.converged_ = stats["converged"]
        self.clamp_fraction_ = stats["clamp_fraction"]
        return self

    def transform(self, X) -> np.ndarray:
        """Quantized integer latents of realizations (one per row)."""
        check_is_fitted(self, "entropy_model_")
        X = check_realizations(X, self.grid_size)
        q, _ = quantize(self._analysis_np(X), self.entropy_model_.support)
        return q.astype(np.int64)

    def inverse_transform(self, Q) -> np.ndarray:
        """Reconstructed grid signals from integer latents."""
        check_is_fitted(self, "entropy_model_")
        Q = np.asarray(Q, dtype=np.float64)
        if Q.ndim == 1:
            Q = Q[None, :]
        return self._synthesis_np(Q)

    def evaluate(self, n_samples: int = 1_000_000, seed: int = 1) -> CodeEvaluation:
        check_is_fitted(self, "entropy_model_")
        return evaluate_maps(
            self._analysis_np, self._synthesis_np, self.entropy_model_,
            self.grid_size, n_samples, seed,
        )

    def latent_report(self, n_samples: int = 100_000, seed: int = 1) -> np.ndarray:
        check_is_fitted(self, "entropy_model_")
        return latent_entropies(
            self._analysis_np, self.entropy_model_.support,
            self.grid_size, n_samples, seed,
        )

    def active_dimensions(self, n_samples: int = 100_000, seed: int = 1) -> int:
        ent = self.latent_report(n_samples=n_samples, seed=seed)
        return int((ent > ACTIVE_DIMENSION_THRESHOLD_BITS).sum())


class FixedOrthonormalCode(_TrainableCode):
    """Fixed orthonormal transform with trainable per-dimension step sizes.

    ``latent_dims=None`` keeps all n basis rows; rate sweeps then rely on the
    optimizer collapsing unused dimensions to zero-entropy bins.
    """

    def __init__(
        self,
        kind: str = "dct2",
        lam: float = 10.0,
        latent_dims: int | None = None,
        grid_size: int = 1024,
        support: int = 64,
        steps: int = 200_000,
        batch_size: int = 256,
        learning_rate: float = 1e-3,
        logit_lr_scale: float = 10.0,
        seed: int = 0,
        init_scale: float = 1.0,
        init_logit_slope: float = 0.25,
        eval_every: int = 1000,
    ):
        self.kind = kind
        self.lam = lam
        self.latent_dims = latent_dims
        self.grid_size = grid_size
        self.support = support
        self.steps = steps
        self.batch_size = batch_size
        self.learning_rate = learning_rate
        self.logit_lr_scale = logit_lr_scale
        self.seed = seed
        self.init_scale = init_scale
        self.init_logit_slope = init_logit_slope
        self.eval_every = eval_every

    def family_tag(self) -> str:
        return self.kind

    def _latent_dims(self) -> int:
        return self.grid_size if self.latent_dims is None else self.latent_dims

    def _build(self):
        base = orthonormal_basis(self.kind, self.grid_size, self._latent_dims())
        pair = DiagonalScaledBasis(base, init_scale=self.init_scale)
        self.scaled_basis_ = pair
        return pair.analysis, pair.synthesis, pair.analysis_np, pair.synthesis_np, pair.params

    @property
    def scale_(self) -> np.ndarray:
        check_is_fitted(self, "scaled_basis_")
        return self.scaled_basis_.scale


class NeuralCode(_TrainableCode):
    """Trainable nonlinear transform code (leaky-ReLU MLPs both ways)."""

    def __init__(
        self,
        lam: float = 10.0,
        latent_dims: int = 16,
        grid_size: int = 1024,
        hidden: int = 100,
        analysis_depth: int = 3,
        synthesis_depth: int = 3,
        alpha: float = 0.01,
        support: int = 64,
        steps: int = 200_000,
        batch_size: int = 256,
        learning_rate: float = 1e-3,
        logit_lr_scale: float = 10.0,
        seed: int = 0,
        init_logit_slope: float = 0.25,
        eval_every: int = 1000,
    ):
        self.lam = lam
        self.latent_dims = latent_dims
        self.grid_size = grid_size
        self.hidden = hidden
        self.analysis_depth = analysis_depth
        self.synthesis_depth = synthesis_depth
        self.alpha = alpha
        self.support = support
        self.steps = steps
        self.batch_size = batch_size
        self.learning_rate = learning_rate
        self.logit_lr_scale = logit_lr_scale
        self.seed = seed
        self.init_logit_slope = init_logit_slope
        self.eval_every = eval_every

    def family_tag(self) -> str:
        if self.analysis_depth == 1 and self.synthesis_depth == 1:
            return "arbitrary-linear"
        if self.analysis_depth == 1:
            return "hybrid-linear-analysis"
        return "nonlinear-mlp"

    def _layer_sizes(self, depth: int, first: int, last: int) -> list[int]:
        if depth < 1:
            raise ValueError("depth must be at least 1")
        return [first] + [self.hidden] * (depth - 1) + [last]

    def _build(self):
        rng = substream(self.seed, "init")
        analysis = AffineStack(
            self._layer_sizes(self.analysis_depth, self.grid_size, self.latent_dims),
            self.alpha, rng,
        )
        synthesis = AffineStack(
            self._layer_sizes(self.synthesis_depth, self.latent_dims, self.grid_size),
            self.alpha, rng,
        )
        self.analysis_stack_ = analysis
        self.synthesis_stack_ = synthesis
        params = analysis.params + synthesis.params
        return analysis, synthesis, analysis.forward_np, synthesis.forward_np, params


class LinearCode(NeuralCode):
    """Arbitrary trainable linear transform pair (one affine layer each way)."""

    def __init__(
        self,
        lam: float = 10.0,
        latent_dims: int = 16,
        grid_size: int = 1024,
        support: int = 64,
        steps: int = 200_000,
        batch_size: int = 256,
        learning_rate: float = 1e-3,
        logit_lr_scale: float = 10.0,
        seed: int = 0,
        init_logit_slope: float = 0.25,
        eval_every: int = 1000,
    ):
        super().__init__(
            lam=lam,
            latent_dims=latent_dims,
            grid_size=grid_size,
            hidden=1,
            analysis_depth=1,
            synthesis_depth=1,
            alpha=1.0,
            support=support,
            steps=steps,
            batch_size=batch_size,
            learning_rate=learning_rate,
            logit_lr_scale=logit_lr_scale,
            seed=seed,
            init_logit_slope=init_logit_slope,
            eval_every=eval_every,
        )
