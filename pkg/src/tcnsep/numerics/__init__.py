"""Minimal float64 tensor engine with reverse-mode differentiation."""

from .tensor import NumericalError, Tape, TapeError, Tensor, backward, current_tape, no_grad, reset_tape
from . import ops
from .ops import (
    as_tensor,
    bigru_forward,
    conv1d,
    depthwise_conv1d,
    frame_layer_norm,
    global_layer_norm,
    gru_forward,
    multihead_attention,
    prelu,
    softmax,
    transposed_conv1d,
)
from .optim import Adam, AdamState, adam_step, clip_grad_norm
from .gradcheck import check_directional, check_gradients

__all__ = [
    "Adam",
    "AdamState",
    "NumericalError",
    "Tape",
    "TapeError",
    "Tensor",
    "adam_step",
    "as_tensor",
    "backward",
    "bigru_forward",
    "check_directional",
    "check_gradients",
    "clip_grad_norm",
    "conv1d",
    "current_tape",
    "depthwise_conv1d",
    "frame_layer_norm",
    "global_layer_norm",
    "gru_forward",
    "multihead_attention",
    "no_grad",
    "ops",
    "prelu",
    "reset_tape",
    "softmax",
    "transposed_conv1d",
]
