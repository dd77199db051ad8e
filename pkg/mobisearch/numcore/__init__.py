"""Dense numeric core: layers, losses, optimizers and gradient checking."""

from .gradcheck import GradCheckReport, gradient_check
from .layers import (
    dense_backward,
    dense_forward,
    dropout,
    lstm_backward,
    lstm_cell,
    lstm_forward,
    relu,
    sigmoid,
    softmax,
)
from .losses import LossStats, cross_entropy, hinge_pair, mse, softmax_cross_entropy
from .optim import OptimizerState, optimizer_step
from .params import Parameter, ParameterStore, glorot_init, uniform_init

__all__ = [
    "GradCheckReport",
    "LossStats",
    "OptimizerState",
    "Parameter",
    "ParameterStore",
    "cross_entropy",
    "dense_backward",
    "dense_forward",
    "dropout",
    "glorot_init",
    "gradient_check",
    "hinge_pair",
    "lstm_backward",
    "lstm_cell",
    "lstm_forward",
    "mse",
    "optimizer_step",
    "relu",
    "sigmoid",
    "softmax",
    "softmax_cross_entropy",
    "uniform_init",
]
