"""Reverse-mode autodiff over numpy float64 arrays."""
from .core import (Tensor, add, amax, as_tensor, backward, broadcast_to, clip, concat, entropy_rows, exp,
                   log, log_softmax, matmul, maximum, mean, minimum, mul, neg, relu, reshape,
                   sigmoid, softmax_rows, softplus, square, sum, take, topological_order, zero_grad)
from .gradcheck import check_gradients, max_relative_error, numeric_grad
from .nn import BatchNormState, batch_norm, dense, glorot, init_mlp2, mlp2
from .optim import AdamState, adam_step, clip_grad_norm

__all__ = [
    "Tensor", "add", "amax", "as_tensor", "backward", "broadcast_to", "clip", "concat", "entropy_rows",
    "exp", "log", "log_softmax", "matmul", "maximum", "mean", "minimum", "mul", "neg", "relu",
    "reshape", "sigmoid", "softmax_rows", "softplus", "square", "sum", "take",
    "topological_order", "zero_grad", "BatchNormState", "batch_norm", "dense", "glorot",
    "init_mlp2", "mlp2", "AdamState", "adam_step", "clip_grad_norm",
    "check_gradients", "max_relative_error", "numeric_grad",
]
