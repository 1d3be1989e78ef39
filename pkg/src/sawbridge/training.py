"""Lagrangian training of transform codes by stochastic gradient descent.

The surrogate objective is ``rate + lam * distortion`` where quantization is
relaxed to additive uniform noise on the latents and the entropy model's bin
masses are interpolated piecewise-linearly at the noisy values.  Evaluation
(and the trace entries recorded during training) always uses hard
round-to-even quantization with the discrete model; the noise proxy exists
only inside the loss.

Parameters are updated by Adam with a single step-size drop at 80% of the
run.  Given a config and seed, training is bitwise reproducible.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .entropy_model import FactorizedEntropyModel
from .process import sample_sawbridge_batch
from .rng import substream

__all__ = [
    "AffineStack",
    "DiagonalScaledBasis",
    "TrainConfig",
    "TrainTrace",
    "TrainingDiverged",
    "surrogate_loss",
    "hard_rate_distortion",
    "Adam",
    "train_code",
]


class AffineStack:
    """Affine layers with leaky ReLU between them (none after the last).

    One layer with ``alpha`` arbitrary is a plain affine map; three layers is
    the nonlinear transform used by the neural codes.
    """

    def __init__(self, sizes: list[int], alpha: float, rng: np.random.Generator):
        self.alpha = float(alpha)
        self.weights: list[Tensor] = []
        self.biases: list[Tensor] = []
        for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
            bound = 1.0 / math.sqrt(fan_in)
            w = rng.uniform(-bound, bound, size=(fan_in, fan_out))
            self.weights.append(Tensor(w, requires_grad=True))
            self.biases.append(Tensor(np.zeros(fan_out), requires_grad=True))

    @classmethod
    def from_arrays(cls, weights, biases, alpha: float) -> "AffineStack":
        stack = cls.__new__(cls)
        stack.alpha = float(alpha)
        stack.weights = [Tensor(w, requires_grad=True) for w in weights]
        stack.biases = [Tensor(b, requires_grad=True) for b in biases]
        return stack

    @property
    def params(self) -> list[Tensor]:
        return [t for pair in zip(self.weights, self.biases) for t in pair]

    def __call__(self, x) -> Tensor:
        out = x if isinstance(x, Tensor) else Tensor(x)
        last = len(self.weights) - 1
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            out = ad.add(ad.matmul(out, w), b)
            if i < last:
                out = ad.leaky_relu(out, self.alpha)
        return out

    def forward_np(self, x: np.ndarray) -> np.ndarray:
        out = x
        last = len(self.weights) - 1
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            out = out @ w.data + b.data
            if i < last:
                out = np.where(out > 0, out, self.alpha * out)
        return out


class DiagonalScaledBasis:
    """Fixed orthonormal rows composed with a trainable diagonal scaling.

    Analysis: y = scale * ((1/n) B x); synthesis: x_hat = B^T (y / scale).
    The scale is kept positive through a log parameterization.
    """

    def __init__(self, base: np.ndarray, init_scale: float = 1.0):
        self.base = np.asarray(base, dtype=np.float64)
        d = self.base.shape[0]
        self.log_scale = Tensor(np.full(d, math.log(init_scale)), requires_grad=True)

    @classmethod
    def from_arrays(cls, base, log_scale) -> "DiagonalScaledBasis":
        pair = cls.__new__(cls)
        pair.base = np.asarray(base, dtype=np.float64)
        pair.log_scale = Tensor(log_scale, requires_grad=True)
        return pair

    @property
    def n(self) -> int:
        return self.base.shape[1]

    @property
    def params(self) -> list[Tensor]:
        return [self.log_scale]

    @property
    def scale(self) -> np.ndarray:
        return np.exp(self.log_scale.data)

    def analysis(self, x) -> Tensor:
        coeffs = ad.matmul(x if isinstance(x, Tensor) else Tensor(x), self.base.T / self.n)
        return ad.mul(coeffs, ad.exp(self.log_scale))

    def synthesis(self, y) -> Tensor:
        unscaled = ad.mul(y if isinstance(y, Tensor) else Tensor(y),
                          ad.exp(ad.scale(self.log_scale, -1.0)))
        return ad.matmul(unscaled, self.base)

    def analysis_np(self, x: np.ndarray) -> np.ndarray:
        return (x @ self.base.T / self.n) * self.scale

    def synthesis_np(self, y: np.ndarray) -> np.ndarray:
        return (y / self.scale) @ self.base


@dataclass
class TrainConfig:
    """Hyperparameters of one Lagrangian optimization run."""

    lam: float
    steps: int = 200_000
    batch_size: int = 256
    learning_rate: float = 1e-3
    lr_drop_fraction: float = 0.8
    lr_drop_factor: float = 0.1
    # the entropy model tolerates larger steps than the transforms; a faster
    # logit optimizer lets hundreds of per-dimension models concentrate or
    # spread within a desk-scale budget
    logit_lr_scale: float = 10.0
    seed: int = 0
    latent_dims: int = 16
    grid_size: int = 1024
    leaky_alpha: float = 0.01
    support: int = 64
    clamp_slope: float = 0.01
    eval_every: int = 1000
    trace_eval_samples: int = 4096

    def __post_init__(self):
        if self.lam <= 0:
            raise ValueError("lam must be positive")
        if self.steps < 1 or self.batch_size < 1:
            raise ValueError("steps and batch_size must be positive")

    def to_file(self, path: str) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            for f in fields(self):
                fh.write(f"{f.name} = {getattr(self, f.name)}\n")

    @classmethod
    def from_file(cls, path: str, **overrides) -> "TrainConfig":
        values: dict = {}
        types = {f.name: f.type for f in fields(cls)}
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, 1):
                line = line.split("#", 1)[0].strip()
                if not line:
                    continue
                if "=" not in line:
                    raise ValueError(f"{path}:{lineno}: expected 'key = value'")
                key, raw = (part.strip() for part in line.split("=", 1))
                if key not in types:
                    raise ValueError(f"{path}:{lineno}: unknown key {key!r}")
                caster = int if types[key] == "int" else float
                values[key] = caster(raw)
        values.update(overrides)
        return cls(**values)


@dataclass
class TrainTrace:
    """Per-checkpoint progress: surrogate loss plus a hard-quantized eval."""

    steps: list[int] = field(default_factory=list)
    surrogate_loss: list[float] = field(default_factory=list)
    entropy_bits: list[float] = field(default_factory=list)
    distortion: list[float] = field(default_factory=list)

    def append(self, step, loss, bits, dist):
        if self.steps and step <= self.steps[-1]:
            raise ValueError("trace steps must be strictly increasing")
        self.steps.append(int(step))
        self.surrogate_loss.append(float(loss))
        self.entropy_bits.append(float(bits))
        self.distortion.append(float(dist))

    def write_csv(self, path: str) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("step,surrogate_loss,entropy_bits,distortion\n")
            for row in zip(self.steps, self.surrogate_loss, self.entropy_bits, self.distortion):
                fh.write(",".join(repr(v) for v in row) + "\n")


class TrainingDiverged(RuntimeError):
    def __init__(self, step: int, loss: float, param_norms: dict):
        self.step = step
        self.loss = loss
        self.param_norms = param_norms
        super().__init__(
            f"non-finite surrogate loss {loss!r} at step {step}; "
            f"parameter norms: {param_norms}"
        )


def surrogate_loss(
    batch: np.ndarray,
    analysis,
    synthesis,
    model: FactorizedEntropyModel,
    logits: Tensor,
    lam: float,
    noise: np.ndarray,
    clamp_slope: float = 0.01,
):
    """Noise-relaxed Lagrangian ``rate + lam * distortion`` for one batch.

    ``analysis``/``synthesis`` are callables producing autodiff tensors;
    ``noise`` holds one uniform [-1/2, 1/2] draw per latent.  Out-of-support
    latents pass through a gradient-preserving leaky clamp and are counted.
    Returns (loss tensor, rate tensor, distortion tensor, clamp count).
    """
    y = ad.add(analysis(batch), Tensor(noise))
    limit = model.support - 1.0
    y, clamped = ad.leaky_clamp(y, -limit, limit, clamp_slope)
    rate = ad.factorized_rate_bits(logits, y)
    recon = synthesis(y)
    dist = ad.mean_squared_error(recon, batch)
    loss = ad.add(rate, ad.scale(dist, lam))
    return loss, rate, dist, clamped


def hard_rate_distortion(analysis_np, synthesis_np, model, batch: np.ndarray):
    """Rate and MSE of a batch under hard round-to-even quantization."""
    latents = analysis_np(batch)
    q = np.round(latents)
    clamped = int((np.abs(q) > model.support).sum())
    q = np.clip(q, -model.support, model.support)
    bits = model.bits(q)
    recon = synthesis_np(q)
    mse = np.mean((recon - batch) ** 2, axis=1)
    return float(bits.mean()), float(mse.mean()), clamped


class Adam:
    """Per-parameter first/second-moment optimizer; updates in place."""

    def __init__(self, params: list[Tensor], beta1=0.9, beta2=0.999, eps=1e-8):
        self.params = params
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.m = [np.zeros_like(p.data) for p in params]
        self.v = [np.zeros_like(p.data) for p in params]
        self.t = 0

    def step(self, lr: float):
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        correction = math.sqrt(1.0 - b2**self.t) / (1.0 - b1**self.t)
        for p, m, v in zip(self.params, self.m, self.v):
            if p.grad is None:
                continue
            m *= b1
            m += (1.0 - b1) * p.grad
            v *= b2
            v += (1.0 - b2) * p.grad**2
            p.data -= lr * correction * m / (np.sqrt(v) + self.eps)


def train_code(
    analysis,
    synthesis,
    analysis_np,
    synthesis_np,
    transform_params: list[Tensor],
    model: FactorizedEntropyModel,
    logits: Tensor,
    config: TrainConfig,
    pool: np.ndarray | None = None,
):
    """Run the SGD loop shared by every trainable code family.

    Draws fresh jump times (or pool rows, when ``pool`` is given) and fresh
    latent noise each batch from seeded substreams.  Returns (trace, stats)
    where stats holds the clamp fraction and convergence flag; raises
    ``TrainingDiverged`` on a non-finite loss.
    """
    cfg = config
    u_stream = substream(cfg.seed, "train-source")
    noise_stream = substream(cfg.seed, "train-noise")
    pool_stream = substream(cfg.seed, "train-pool")
    params = transform_params + [logits]
    opt = Adam(transform_params)
    logit_opt = Adam([logits])
    trace = TrainTrace()
    drop_step = int(cfg.steps * cfg.lr_drop_fraction)
    clamp_total = 0
    latent_total = 0

    def record(step, loss_value):
        eval_stream = substream(cfg.seed, "trace-eval", index=step)
        u = eval_stream.uniform(size=cfg.trace_eval_samples)
        batch = sample_sawbridge_batch(u, cfg.grid_size)
        bits, dist, _ = hard_rate_distortion(analysis_np, synthesis_np, model, batch)
        trace.append(step, loss_value, bits, dist)
        pmf_err = np.abs(model.pmf().sum(axis=1) - 1.0).max()
        if pmf_err > 1e-12:
            raise AssertionError(f"entropy model drifted from normalization: {pmf_err}")

    for step in range(1, cfg.steps + 1):
        if pool is None:
            u = u_stream.uniform(size=cfg.batch_size)
            batch = sample_sawbridge_batch(u, cfg.grid_size)
        else:
            rows = pool_stream.integers(0, pool.shape[0], size=cfg.batch_size)
            batch = pool[rows]
        noise = noise_stream.uniform(-0.5, 0.5, size=(cfg.batch_size, cfg.latent_dims))
        loss, rate, dist, clamped = surrogate_loss(
            batch, analysis, synthesis, model, logits, cfg.lam, noise, cfg.clamp_slope
        )
        loss_value = float(loss.data)
        if not math.isfinite(loss_value):
            norms = {f"param{i}": float(np.linalg.norm(p.data)) for i, p in enumerate(params)}
            raise TrainingDiverged(step, loss_value, norms)
        clamp_total += clamped
        latent_total += cfg.batch_size * cfg.latent_dims
        for p in params:
            p.zero_grad()
        loss.backward()
        lr = cfg.learning_rate * (cfg.lr_drop_factor if step > drop_step else 1.0)
        opt.step(lr)
        logit_opt.step(lr * cfg.logit_lr_scale)
        if step % cfg.eval_every == 0 or step == cfg.steps:
            record(step, loss_value)

    # A run that ends >5% above its best checkpoint loss is flagged as stalled.
    best = min(trace.surrogate_loss)
    converged = trace.surrogate_loss[-1] <= 1.05 * best if best > 0 else True
    stats = {
        "clamp_fraction": clamp_total / max(latent_total, 1),
        "converged": bool(converged),
    }
    return trace, stats
