"""Minimal dense-tensor reverse-mode differentiation."""

from marcel.autodiff.gradcheck import finite_difference, gradient_errors, relative_error
from marcel.autodiff.nn import MLP, Embedding, Linear, Module
from marcel.autodiff.optim import Adam, AdamState, adam_step
from marcel.autodiff.tensor import (
    Tensor,
    add,
    as_tensor,
    backward,
    broadcast,
    concat,
    cos,
    div,
    exp,
    get_default_dtype,
    index_select,
    log,
    matmul,
    max,
    mean,
    mul,
    neg,
    power,
    precision,
    relu,
    reshape,
    scatter_add,
    set_default_dtype,
    shifted_softplus,
    sigmoid,
    softmax,
    sqrt,
    sub,
    sum,
    tanh,
    transpose,
)

__all__ = [
    "Adam", "AdamState", "Embedding", "Linear", "MLP", "Module", "Tensor", "adam_step", "add",
    "as_tensor", "backward", "broadcast", "concat", "cos", "div", "exp", "finite_difference",
    "get_default_dtype", "gradient_errors", "index_select", "log", "matmul", "max", "mean", "mul",
    "neg", "power", "precision", "relative_error", "relu", "reshape", "scatter_add",
    "set_default_dtype", "shifted_softplus", "sigmoid", "softmax", "sqrt", "sub", "sum", "tanh",
    "transpose",
]
