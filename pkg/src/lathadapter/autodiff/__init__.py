"""Minimal reverse-mode differentiation used by the training losses."""
from .tape import (Tape, Var, value_of, add, sub, mul, div, scale, dot, norm, tanh,
                   arctanh, exp, log, sqrt, relu, maximum, max2, clip, sum, mean,
                   matmul, cosine_similarity, transpose, reshape, expand_dims, take,
                   concat, logsumexp)
from .gradcheck import grad_check, numeric_grad, analytic_grad
from . import hyperbolic

__all__ = [
    "Tape", "Var", "value_of", "add", "sub", "mul", "div", "scale", "dot", "norm",
    "tanh", "arctanh", "exp", "log", "sqrt", "relu", "maximum", "max2", "clip", "sum",
    "mean", "matmul", "cosine_similarity", "transpose", "reshape", "expand_dims",
    "take", "concat", "logsumexp", "grad_check", "numeric_grad", "analytic_grad",
    "hyperbolic",
]
