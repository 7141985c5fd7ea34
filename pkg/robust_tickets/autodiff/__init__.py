from .gradcheck import GradCheckResult, grad_check
from .ops import (
    add,
    as_tensor,
    conv2d,
    flatten,
    global_avg_pool,
    log_softmax,
    matmul,
    max_pool2d,
    mean,
    mul,
    relu,
    reshape,
    scale,
    softmax,
    softmax_cross_entropy,
    sub,
    transpose,
)
from .ops import sum as sum_
from .tensor import Array, Operation, Tape, Tensor, backward, grad

__all__ = [
    "Array",
    "GradCheckResult",
    "Operation",
    "Tape",
    "Tensor",
    "add",
    "as_tensor",
    "backward",
    "conv2d",
    "flatten",
    "global_avg_pool",
    "grad",
    "grad_check",
    "log_softmax",
    "matmul",
    "max_pool2d",
    "mean",
    "mul",
    "relu",
    "reshape",
    "scale",
    "softmax",
    "softmax_cross_entropy",
    "sub",
    "sum_",
    "transpose",
]
