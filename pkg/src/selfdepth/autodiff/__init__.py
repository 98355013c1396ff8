"""Minimal reverse-mode autodiff substrate for the depth pipeline."""
from .gradcheck import GradCheckReport, grad_check
from .ops import (absolute, activation, add, avg_pool3x3_reflect, clamp_min,
                  concat, conv2d, conv3d, div, elementwise_min, elu, exp,
                  getitem, masked_fill, matmul, mul, power, reduce_mean,
                  reduce_sum, relu, reshape, sigmoid, sqrt, stack, sub,
                  transpose, upsample2x)
from .tensor import (ComputationRecord, ShapeError, Tensor, as_tensor,
                     backward, linearize, make_op)

__all__ = [
    "ComputationRecord", "GradCheckReport", "ShapeError", "Tensor",
    "absolute", "activation", "add", "as_tensor", "avg_pool3x3_reflect",
    "backward", "clamp_min", "concat", "conv2d", "conv3d", "div",
    "elementwise_min", "elu", "exp", "getitem", "grad_check", "linearize",
    "make_op", "masked_fill", "matmul", "mul", "power", "reduce_mean",
    "reduce_sum", "relu", "reshape", "sigmoid", "sqrt", "stack", "sub",
    "transpose", "upsample2x",
]
