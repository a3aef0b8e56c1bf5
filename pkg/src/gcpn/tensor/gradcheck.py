"""Central finite-difference gradient oracle."""
from __future__ import annotations

from typing import Callable, Mapping

import numpy as np

from .core import Tensor, backward


def numeric_grad(fn: Callable[[], float], tensor: Tensor, h: float = 1e-5) -> np.ndarray:
    """d fn / d tensor by central differences, perturbing ``tensor.data`` in place."""
    grad = np.zeros_like(tensor.data)
    flat = tensor.data.reshape(-1)
    out = grad.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + h
        up = fn()
        flat[i] = orig - h
        down = fn()
        flat[i] = orig
        out[i] = (up - down) / (2.0 * h)
    return grad


def max_relative_error(analytic: np.ndarray, numeric: np.ndarray, floor: float = 1e-6) -> float:
    """Largest entrywise |a - n| / max(|a|, |n|, floor)."""
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), floor)
    return float(np.max(np.abs(analytic - numeric) / denom)) if analytic.size else 0.0


def check_gradients(fn: Callable[[], Tensor], params: Mapping[str, Tensor], h: float = 1e-5,
                    floor: float = 1e-6) -> dict[str, float]:
    """Max relative error per parameter between backward() and finite differences."""
    for p in params.values():
        p.grad = None
    grads = backward(fn(), params)
    scalar = lambda: float(fn().data)  # noqa: E731
    return {name: max_relative_error(grads[name], numeric_grad(scalar, p, h), floor)
            for name, p in params.items()}
