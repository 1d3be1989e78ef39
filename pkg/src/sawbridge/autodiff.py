"""Minimal reverse-mode automatic differentiation over numpy arrays.

Covers exactly the operations the trainable codes need: affine layers, leaky
ReLU, broadcast add/multiply, exp, a leaky clamp, batch MSE against a
constant, and the factorized-entropy-model rate term.  Nodes record their
parents and a backward closure; ``backward()`` runs the tape in reverse
topological order.  Gradients accumulate in ``Tensor.grad`` for every node
with ``requires_grad`` or grad-requiring ancestors.
"""

from __future__ import annotations

import math

import numpy as np

__all__ = [
    "Tensor",
    "matmul",
    "add",
    "sub",
    "mul",
    "exp",
    "leaky_relu",
    "leaky_clamp",
    "scale",
    "mean_squared_error",
    "factorized_rate_bits",
]

_LN2 = math.log(2.0)


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")

    def __init__(self, data, requires_grad: bool = False):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad = None
        self.requires_grad = requires_grad
        self._parents = ()
        self._backward = None

    @property
    def shape(self):
        return self.data.shape

    def zero_grad(self):
        self.grad = None

    def _accumulate(self, g):
        if self.grad is None:
            self.grad = np.array(g, dtype=np.float64, copy=True)
        else:
            self.grad += g

    def backward(self):
        if self.data.size != 1:
            raise ValueError("backward() requires a scalar loss")
        order: list[Tensor] = []
        seen: set[int] = set()
        stack = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                order.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                stack.append((p, False))
        self.grad = np.ones_like(self.data)
        for node in reversed(order):
            if node._backward is not None and node.grad is not None:
                node._backward(node.grad)


def _as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _needs_grad(*tensors: Tensor) -> bool:
    return any(t.requires_grad or t._parents for t in tensors)


def _node(data, parents, backward) -> Tensor:
    out = Tensor(data)
    if _needs_grad(*parents):
        out._parents = tuple(parents)
        out._backward = backward
    return out


def _unbroadcast(g: np.ndarray, shape: tuple) -> np.ndarray:
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, dim in enumerate(shape):
        if dim == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g.reshape(shape)


def matmul(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)

    def backward(g):
        a._accumulate(g @ b.data.T)
        b._accumulate(a.data.T @ g)

    return _node(a.data @ b.data, (a, b), backward)


def add(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)

    def backward(g):
        a._accumulate(_unbroadcast(g, a.data.shape))
        b._accumulate(_unbroadcast(g, b.data.shape))

    return _node(a.data + b.data, (a, b), backward)


def sub(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)

    def backward(g):
        a._accumulate(_unbroadcast(g, a.data.shape))
        b._accumulate(-_unbroadcast(g, b.data.shape))

    return _node(a.data - b.data, (a, b), backward)


def mul(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)

    def backward(g):
        a._accumulate(_unbroadcast(g * b.data, a.data.shape))
        b._accumulate(_unbroadcast(g * a.data, b.data.shape))

    return _node(a.data * b.data, (a, b), backward)


def exp(a) -> Tensor:
    a = _as_tensor(a)
    out_data = np.exp(a.data)

    def backward(g):
        a._accumulate(g * out_data)

    return _node(out_data, (a,), backward)


def leaky_relu(a, alpha: float) -> Tensor:
    a = _as_tensor(a)
    mask = a.data > 0

    def backward(g):
        a._accumulate(g * np.where(mask, 1.0, alpha))

    return _node(np.where(mask, a.data, alpha * a.data), (a,), backward)


def leaky_clamp(
    a, lo: float, hi: float, slope: float = 0.01, hard_margin: float = 0.5
) -> tuple[Tensor, int]:
    """Identity on [lo, hi]; linear with small slope outside, saturating hard
    at ``hard_margin`` beyond the bounds.

    The leak keeps a nonzero gradient on moderate excursions so training can
    pull them back inside; the hard rim bounds the output whatever the input.
    Returns the clamped tensor and the out-of-range count.
    """
    a = _as_tensor(a)
    below = a.data < lo
    above = a.data > hi
    out_data = np.where(below, lo + slope * (a.data - lo), a.data)
    out_data = np.where(above, hi + slope * (a.data - hi), out_data)
    saturated = (out_data < lo - hard_margin) | (out_data > hi + hard_margin)
    out_data = np.clip(out_data, lo - hard_margin, hi + hard_margin)
    outside = below | above

    def backward(g):
        local = np.where(outside, slope, 1.0)
        local[saturated] = 0.0
        a._accumulate(g * local)

    return _node(out_data, (a,), backward), int(outside.sum())


def scale(a, c: float) -> Tensor:
    a = _as_tensor(a)

    def backward(g):
        a._accumulate(g * c)

    return _node(a.data * c, (a,), backward)


def mean_squared_error(a, target: np.ndarray) -> Tensor:
    """Mean over every element of (a - target)^2.

    With rows holding grid signals this is exactly the batch-averaged grid
    MSE.
    """
    a = _as_tensor(a)
    diff = a.data - target

    def backward(g):
        a._accumulate(g * 2.0 * diff / diff.size)

    return _node(np.mean(diff**2), (a,), backward)


def factorized_rate_bits(logits, y) -> Tensor:
    """Batch-mean total code length under a factorized integer-bin model.

    ``logits`` has shape (d, bins) for bins centered on the integers
    -B .. B; ``y`` holds (batch, d) latents with values inside [-B, B)
    so both interpolation endpoints exist.  Each latent's probability is the
    piecewise-linear interpolation of the bin masses (softmax of the logits)
    at its value, and the result is ``mean_batch sum_d -log2 p_d(y)``.

    Gradients flow to the logits through the softmax and to ``y`` through the
    interpolation slope.
    """
    logits, y = _as_tensor(logits), _as_tensor(y)
    d, bins = logits.data.shape
    batch = y.data.shape[0]
    if y.data.ndim != 2 or y.data.shape[1] != d:
        raise ValueError(f"latents must have shape (batch, {d}), got {y.data.shape}")
    half = (bins - 1) // 2
    if y.data.min() < -half or y.data.max() >= half:
        raise ValueError("latents fall outside the interpolable support")

    shifted = logits.data - logits.data.max(axis=1, keepdims=True)
    expd = np.exp(shifted)
    pmf = expd / expd.sum(axis=1, keepdims=True)

    lo = np.floor(y.data).astype(np.int64)
    frac = y.data - lo
    cols_lo = lo + half
    rows = np.broadcast_to(np.arange(d), (batch, d))
    p_lo = pmf[rows, cols_lo]
    p_hi = pmf[rows, cols_lo + 1]
    p_val = (1.0 - frac) * p_lo + frac * p_hi
    with np.errstate(divide="ignore"):  # zero mass -> inf bits, caught upstream
        value = -np.log2(p_val).sum() / batch

    def backward(g):
        # d(loss)/d(p at y) for each latent
        dp = -g / (_LN2 * p_val * batch)
        y._accumulate(dp * (p_hi - p_lo))
        flat_lo = (rows * bins + cols_lo).ravel()
        grad_pmf = np.bincount(
            flat_lo, weights=(dp * (1.0 - frac)).ravel(), minlength=d * bins
        )
        grad_pmf += np.bincount(
            flat_lo + 1, weights=(dp * frac).ravel(), minlength=d * bins
        )
        grad_pmf = grad_pmf.reshape(d, bins)
        inner = (grad_pmf * pmf).sum(axis=1, keepdims=True)
        logits._accumulate(pmf * (grad_pmf - inner))

    return _node(value, (logits, y), backward)
