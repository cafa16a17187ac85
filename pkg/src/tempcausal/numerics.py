"""Dense float64 primitives with hand-written gradients.

Tensors are plain ``numpy.ndarray`` objects in float64. Every forward
primitive has a matching ``*_backward`` that returns input/parameter
gradients given the upstream gradient.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

DTYPE = np.float64


class DimensionError(ValueError):
    """Raised when operand shapes are incompatible."""


def as_tensor(x) -> np.ndarray:
    return np.asarray(x, dtype=DTYPE)


def linear_forward(x: np.ndarray, W: np.ndarray, b: np.ndarray | None = None) -> np.ndarray:
    """``x @ W + b`` broadcast over the leading dimensions of ``x``."""
    x, W = as_tensor(x), as_tensor(W)
    if W.ndim != 2 or x.shape[-1] != W.shape[0]:
        raise DimensionError(f"cannot apply weight {W.shape} to input {x.shape}")
    y = x @ W
    if b is not None:
        b = as_tensor(b)
        if b.shape != (W.shape[1],):
            raise DimensionError(f"bias shape {b.shape} does not match output width {W.shape[1]}")
        y = y + b
    return y


def linear_backward(x: np.ndarray, W: np.ndarray, dy: np.ndarray):
    """Return ``(dx, dW, db)`` for ``y = x @ W + b``; parameter grads sum over leading dims."""
    dx = dy @ W.T
    x2 = x.reshape(-1, x.shape[-1])
    dy2 = dy.reshape(-1, dy.shape[-1])
    return dx, x2.T @ dy2, dy2.sum(axis=0)


def leaky_relu(x: np.ndarray, slope: float = 0.01) -> np.ndarray:
    if not 0.0 < slope < 1.0:
        raise ValueError(f"leaky slope must lie in (0, 1), got {slope}")
    x = as_tensor(x)
    return np.where(x >= 0, x, slope * x)


def leaky_relu_grad(x: np.ndarray, slope: float = 0.01) -> np.ndarray:
    """Pointwise derivative; the kink at 0 takes the right-hand value 1."""
    return np.where(as_tensor(x) >= 0, 1.0, slope)


def softmax(x: np.ndarray, axis: int = -1) -> np.ndarray:
    """Max-subtracted softmax. Temperature, if any, is applied by the caller."""
    x = as_tensor(x)
    z = x - x.max(axis=axis, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=axis, keepdims=True)


def softmax_backward(p: np.ndarray, dp: np.ndarray, axis: int = -1) -> np.ndarray:
    """Gradient w.r.t. the softmax input given its output ``p``."""
    return p * (dp - (dp * p).sum(axis=axis, keepdims=True))


def he_init(shape, fan_in: int, rng_seed=None) -> np.ndarray:
    """Normal(0, sqrt(2 / fan_in)) samples.

    ``rng_seed`` may be an int, ``None`` or an existing ``np.random.Generator``
    (the generator is advanced in place).
    """
    if fan_in < 1:
        raise ValueError("fan_in must be >= 1")
    rng = rng_seed if isinstance(rng_seed, np.random.Generator) else np.random.default_rng(rng_seed)
    return rng.normal(0.0, np.sqrt(2.0 / fan_in), size=tuple(shape)).astype(DTYPE)


@dataclass
class AdamState:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)

    def copy(self) -> "AdamState":
        return AdamState(self.lr, self.beta1, self.beta2, self.eps, self.step,
                         {k: a.copy() for k, a in self.m.items()},
                         {k: a.copy() for k, a in self.v.items()})


def adam_step(params: dict[str, np.ndarray], grads: dict[str, np.ndarray], state: AdamState):
    """One bias-corrected Adam update.

    Returns new ``(params, state)``; the inputs are left untouched so that
    repeated calls from the same state give identical results.
    """
    if set(params) != set(grads):
        raise DimensionError(f"gradient keys {sorted(grads)} do not match parameters {sorted(params)}")
    new = state.copy()
    new.step += 1
    bc1 = 1.0 - new.beta1 ** new.step
    bc2 = 1.0 - new.beta2 ** new.step
    out = {}
    for name, p in params.items():
        g = grads[name]
        if g.shape != p.shape:
            raise DimensionError(f"gradient for {name!r} has shape {g.shape}, parameter {p.shape}")
        m = new.m.get(name, np.zeros_like(p))
        v = new.v.get(name, np.zeros_like(p))
        m = new.beta1 * m + (1.0 - new.beta1) * g
        v = new.beta2 * v + (1.0 - new.beta2) * (g * g)
        new.m[name], new.v[name] = m, v
        out[name] = p - new.lr * (m / bc1) / (np.sqrt(v / bc2) + new.eps)
    return out, new


def finite_diff_grad(f: Callable[[np.ndarray], float], x: np.ndarray, eps: float = 1e-6) -> np.ndarray:
    """Central-difference gradient of a scalar function, one element at a time."""
    if eps <= 0:
        raise ValueError("eps must be positive")
    x = as_tensor(x).copy()
    grad = np.zeros_like(x)
    flat, gflat = x.reshape(-1), grad.reshape(-1)
    for k in range(flat.size):
        orig = flat[k]
        flat[k] = orig + eps
        hi = f(x)
        flat[k] = orig - eps
        lo = f(x)
        flat[k] = orig
        gflat[k] = (hi - lo) / (2.0 * eps)
    return grad


def relative_error(a: np.ndarray, b: np.ndarray, floor: float = 1e-8) -> float:
    """Max-norm relative error ``|a - b| / max(|a|, |b|, floor)``."""
    a, b = as_tensor(a), as_tensor(b)
    scale = max(np.abs(a).max(initial=0.0), np.abs(b).max(initial=0.0), floor)
    return float(np.abs(a - b).max(initial=0.0) / scale)
