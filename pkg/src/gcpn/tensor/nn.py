"""Layer primitives built on the tensor core: batch norm, dense layers, init."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import EmptyBatchError
from .core import Tensor, _result, add, matmul, relu

BN_EPS = 1e-5
BN_MOMENTUM = 0.9


@dataclass
class BatchNormState:
    """Running moments for one batch-norm layer (not learnable)."""

    running_mean: np.ndarray
    running_var: np.ndarray
    momentum: float = BN_MOMENTUM
    eps: float = BN_EPS

    @classmethod
    def fresh(cls, width: int) -> "BatchNormState":
        return cls(np.zeros(width), np.ones(width))


def batch_norm(x: Tensor, scale: Tensor, shift: Tensor, mode: str, state: BatchNormState,
               row_mask: np.ndarray | None = None) -> Tensor:
    """Normalize the columns of a 2-D tensor.

    In ``"train"`` mode the batch statistics are taken over rows where
    ``row_mask`` is set (all rows when it is ``None``) and the running moments
    move by an exponential average. ``"eval"`` uses the running moments.
    """
    m = x.shape[0]
    if m == 0:
        raise EmptyBatchError("batch_norm on an empty batch")
    if mode == "eval":
        inv = 1.0 / np.sqrt(state.running_var + state.eps)
        # gradient through the fixed standardization is a column scaling
        xhat = _result((x.data - state.running_mean) * inv, (x,), lambda g: (g * inv,))
        return add(xhat * scale, shift)
    if mode != "train":
        raise ValueError(f"unknown batch-norm mode {mode!r}")
    w = np.ones((m, 1)) if row_mask is None else np.asarray(row_mask, dtype=np.float64).reshape(m, 1)
    cnt = w.sum()
    if cnt == 0:
        raise EmptyBatchError("batch_norm row mask selects no rows")
    mu = (w * x.data).sum(axis=0) / cnt
    var = (w * (x.data - mu) ** 2).sum(axis=0) / cnt
    inv = 1.0 / np.sqrt(var + state.eps)
    xhat_data = (x.data - mu) * inv

    state.running_mean = state.momentum * state.running_mean + (1.0 - state.momentum) * mu
    state.running_var = state.momentum * state.running_var + (1.0 - state.momentum) * var

    def backward(g):
        gs = g.sum(axis=0)
        gx = (g * xhat_data).sum(axis=0)
        return (inv * (g - w * gs / cnt - w * xhat_data * gx / cnt),)

    xhat = _result(xhat_data, (x,), backward)
    return add(xhat * scale, shift)


def glorot(rng: np.random.Generator, fan_in: int, fan_out: int) -> np.ndarray:
    s = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-s, s, size=(fan_in, fan_out))


def dense(x: Tensor, weight: Tensor, bias: Tensor) -> Tensor:
    return add(matmul(x, weight), bias)


def mlp2(x: Tensor, params, prefix: str) -> Tensor:
    """Two-layer perceptron ``W2 · relu(W1 x + b1) + b2`` read from ``params``."""
    h = relu(dense(x, params[f"{prefix}.w1"], params[f"{prefix}.b1"]))
    return dense(h, params[f"{prefix}.w2"], params[f"{prefix}.b2"])


def init_mlp2(rng: np.random.Generator, prefix: str, d_in: int, hidden: int, d_out: int,
              zero_output: bool = False) -> dict[str, Tensor]:
    w2 = np.zeros((hidden, d_out)) if zero_output else glorot(rng, hidden, d_out)
    return {
        f"{prefix}.w1": Tensor(glorot(rng, d_in, hidden), requires_grad=True, name=f"{prefix}.w1"),
        f"{prefix}.b1": Tensor(np.zeros(hidden), requires_grad=True, name=f"{prefix}.b1"),
        f"{prefix}.w2": Tensor(w2, requires_grad=True, name=f"{prefix}.w2"),
        f"{prefix}.b2": Tensor(np.zeros(d_out), requires_grad=True, name=f"{prefix}.b2"),
    }
