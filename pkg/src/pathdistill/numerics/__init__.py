"""Dense reverse-mode differentiation kernel, parameter store, and optimizer.

Values are float32 by default; gradient checking runs the same ops at
float64 (dtype follows the inputs). All randomness is injected through
explicit ``numpy.random.Generator`` instances.
"""

from .autodiff import (
    Tensor,
    abs_,
    affine,
    backward,
    concat,
    dropout,
    exp,
    log,
    log_softmax,
    matmul,
    maximum_scalar,
    mean,
    relu,
    sigmoid,
    softmax,
    softplus,
    sum_,
    tanh,
    transpose,
)
from .nn import glorot_uniform, mlp_apply
from .optim import OptimizerState, adam_step, cosine_lr
from .params import ParameterStore, load_checkpoint, save_checkpoint

__all__ = [
    "Tensor",
    "abs_",
    "affine",
    "backward",
    "concat",
    "dropout",
    "exp",
    "log",
    "log_softmax",
    "matmul",
    "maximum_scalar",
    "mean",
    "relu",
    "sigmoid",
    "softmax",
    "softplus",
    "sum_",
    "tanh",
    "transpose",
    "glorot_uniform",
    "mlp_apply",
    "OptimizerState",
    "adam_step",
    "cosine_lr",
    "ParameterStore",
    "load_checkpoint",
    "save_checkpoint",
]
