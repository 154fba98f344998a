from . import autodiff as ad
from .autodiff import (ContractError, DimensionError, Tape, Tensor, as_tensor, backward,
                       concat, exp, lgamma, log, relu, sigmoid, softmax, softplus, sqrt,
                       stack, tanh, zero_grad)
from .nn import (LAYER_NORM_EPS, init_lstm, init_uniform, layer_norm, linear_forward,
                 lstm_cell_step, softmax_rows)
from .optim import Adam, AdamState, adam_step

__all__ = [
    "ad", "Tensor", "Tape", "backward", "zero_grad", "as_tensor", "ContractError",
    "DimensionError", "concat", "stack", "exp", "log", "lgamma", "relu", "sigmoid",
    "softmax", "softplus", "sqrt", "tanh", "linear_forward", "softmax_rows", "layer_norm",
    "lstm_cell_step", "init_lstm", "init_uniform", "LAYER_NORM_EPS", "Adam", "AdamState",
    "adam_step",
]
