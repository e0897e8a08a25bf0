"""Layerwise feature extractor.

Collapses an ``(L, N, D)`` stack of per-layer patch embeddings into a single
``(N, D)`` plane through a chain of stages, each a squeeze-excitation
recalibration of the layer channels followed by a bias-free pointwise
convolution that mixes ``Cin`` layers down to ``Cout``.

Stage parameters are plain mappings with keys ``se.w1`` ``(C, C/r)``,
``se.w2`` ``(C/r, C)`` and ``mix`` ``(Cout, Cin)``.
"""
from __future__ import annotations

from typing import Mapping, Sequence

import numpy as np

from .errors import ConfigurationError, DimensionError
from .nn import ops

StageParams = Mapping[str, np.ndarray]


def se_forward(x, w1, w2):
    """Squeeze-excitation over channel axis ``-3`` of ``x``.

    The squeeze is a global mean over tokens and features.
    """
    channels = x.shape[-3]
    if w1.shape[0] != channels or w2.shape != (w1.shape[1], channels):
        raise DimensionError(
            f"se: input with {channels} channels does not match w1 {w1.shape} / w2 {w2.shape}"
        )
    squeezed = x.mean(axis=(-2, -1))
    h, c1 = ops.linear_forward(squeezed, w1)
    a, c2 = ops.gelu_forward(h)
    e, c3 = ops.linear_forward(a, w2)
    gates, c4 = ops.sigmoid_forward(e)
    out = gates[..., None, None] * x
    return out, (x, gates, c1, c2, c3, c4)


def se_backward(dout, cache):
    """Returns ``(dx, dw1, dw2)``."""
    x, gates, c1, c2, c3, c4 = cache
    n, d = x.shape[-2:]
    dgates = (dout * x).sum(axis=(-2, -1))
    de = ops.sigmoid_backward(dgates, c4)
    da, dw2, _ = ops.linear_backward(de, c3)
    dh = ops.gelu_backward(da, c2)
    dsq, dw1, _ = ops.linear_backward(dh, c1)
    dx = gates[..., None, None] * dout + dsq[..., None, None] / (n * d)
    return dx, dw1, dw2


def se_block(x, w1, w2):
    return se_forward(x, w1, w2)[0]


def lfe_stage_forward(x, params: StageParams):
    mix = params["mix"]
    if x.shape[-3] != mix.shape[1] or params["se.w1"].shape[0] != mix.shape[1]:
        raise ConfigurationError(
            f"stage expects {mix.shape[1]} input channels, got {x.shape[-3]}"
        )
    y, c_se = se_forward(x, params["se.w1"], params["se.w2"])
    out, c_mix = ops.conv1x1_channels_forward(y, mix)
    return out, (c_se, c_mix)


def lfe_stage_backward(dout, cache):
    """Returns ``(dx, grads)`` where ``grads`` mirrors the stage parameter keys."""
    c_se, c_mix = cache
    dy, dmix = ops.conv1x1_channels_backward(dout, c_mix)
    dx, dw1, dw2 = se_backward(dy, c_se)
    return dx, {"se.w1": dw1, "se.w2": dw2, "mix": dmix}


def lfe_stage(x, params: StageParams):
    return lfe_stage_forward(x, params)[0]


def check_chain(stages: Sequence[StageParams], layers: int) -> None:
    channels = layers
    for i, st in enumerate(stages):
        cout, cin = st["mix"].shape
        if cin != channels:
            raise ConfigurationError(f"stage {i} expects {cin} channels, chain carries {channels}")
        channels = cout
    if channels != 1:
        raise ConfigurationError(f"stage chain ends at {channels} channels, expected 1")


def lfe_forward(stack, stages: Sequence[StageParams]):
    """Apply the stage chain to ``(..., L, N, D)`` and squeeze to ``(..., N, D)``."""
    stack = np.asarray(stack, dtype=np.float64)
    if stack.ndim < 3:
        raise DimensionError(f"layer stack must have shape (..., L, N, D), got {stack.shape}")
    check_chain(stages, stack.shape[-3])
    x = stack
    caches = []
    for st in stages:
        x, c = lfe_stage_forward(x, st)
        caches.append(c)
    return x[..., 0, :, :], caches


def lfe_backward(dfused, caches):
    """Returns ``(dstack, [grads per stage])``."""
    dx = dfused[..., None, :, :]
    grads = []
    for c in reversed(caches):
        dx, g = lfe_stage_backward(dx, c)
        grads.append(g)
    return dx, grads[::-1]


def lfe(stack, stages: Sequence[StageParams]):
    return lfe_forward(stack, stages)[0]
