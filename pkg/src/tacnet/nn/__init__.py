"""Deterministic numeric core: primitive ops with manual backward passes."""
from .gradcheck import GradCheckReport, grad_check, numerical_grad, relative_error
from .ops import (
    conv1x1_channels,
    conv1x1_channels_backward,
    conv1x1_channels_forward,
    gelu,
    gelu_backward,
    gelu_forward,
    layer_norm,
    layer_norm_backward,
    layer_norm_forward,
    linear,
    linear_backward,
    linear_forward,
    multi_head_attention,
    multi_head_attention_backward,
    multi_head_attention_forward,
    sigmoid_backward,
    sigmoid_forward,
    softmax_rows,
    softmax_rows_backward,
    softmax_rows_forward,
)
from .params import Param, ParamStore

__all__ = [
    "GradCheckReport",
    "Param",
    "ParamStore",
    "conv1x1_channels",
    "conv1x1_channels_backward",
    "conv1x1_channels_forward",
    "gelu",
    "gelu_backward",
    "gelu_forward",
    "grad_check",
    "layer_norm",
    "layer_norm_backward",
    "layer_norm_forward",
    "linear",
    "linear_backward",
    "linear_forward",
    "multi_head_attention",
    "multi_head_attention_backward",
    "multi_head_attention_forward",
    "numerical_grad",
    "relative_error",
    "sigmoid_backward",
    "sigmoid_forward",
    "softmax_rows",
    "softmax_rows_backward",
    "softmax_rows_forward",
]
