"""Forward/backward pairs for the primitives the connector is built from.

Every ``*_forward`` returns ``(out, cache)`` and the matching ``*_backward``
takes the upstream gradient plus that cache. All ops accept arbitrary
leading batch axes.
"""
from __future__ import annotations

import math

import numpy as np
from scipy.special import erf, expit

from ..errors import ConfigurationError, DimensionError

_INV_SQRT2 = 1.0 / math.sqrt(2.0)
_INV_SQRT2PI = 1.0 / math.sqrt(2.0 * math.pi)


def _flat_rows(a: np.ndarray) -> np.ndarray:
    return a.reshape(-1, a.shape[-1])


def weight_grad(x: np.ndarray, dy: np.ndarray) -> np.ndarray:
    """Sum of outer products ``x^T dy`` over every leading axis."""
    return _flat_rows(x).T @ _flat_rows(dy)


# -- linear -----------------------------------------------------------------

def linear_forward(x, w, b=None):
    if x.shape[-1] != w.shape[0]:
        raise DimensionError(
            f"linear: input shape {x.shape} does not match weight shape {w.shape}"
        )
    y = x @ w
    if b is not None:
        if b.shape != (w.shape[1],):
            raise DimensionError(
                f"linear: bias shape {b.shape} does not match weight shape {w.shape}"
            )
        y = y + b
    return y, (x, w, b is not None)


def linear_backward(dy, cache):
    x, w, has_bias = cache
    dx = dy @ w.T
    dw = weight_grad(x, dy)
    db = _flat_rows(dy).sum(axis=0) if has_bias else None
    return dx, dw, db


# -- activations ------------------------------------------------------------

def gelu_forward(x):
    cdf = 0.5 * (1.0 + erf(x * _INV_SQRT2))
    return x * cdf, (x, cdf)


def gelu_backward(dy, cache):
    x, cdf = cache
    pdf = _INV_SQRT2PI * np.exp(-0.5 * x * x)
    return dy * (cdf + x * pdf)


def sigmoid_forward(x):
    y = expit(x)
    return y, y


def sigmoid_backward(dy, cache):
    y = cache
    return dy * y * (1.0 - y)


def softmax_rows_forward(x):
    z = x - x.max(axis=-1, keepdims=True)
    e = np.exp(z)
    y = e / e.sum(axis=-1, keepdims=True)
    return y, y


def softmax_rows_backward(dy, cache):
    y = cache
    return y * (dy - (dy * y).sum(axis=-1, keepdims=True))


# -- normalization ----------------------------------------------------------

def layer_norm_forward(x, gamma, beta, eps=1e-5):
    if gamma.shape != (x.shape[-1],) or beta.shape != (x.shape[-1],):
        raise DimensionError(
            f"layer_norm: affine shapes {gamma.shape}/{beta.shape} "
            f"do not match input shape {x.shape}"
        )
    mu = x.mean(axis=-1, keepdims=True)
    xc = x - mu
    var = (xc * xc).mean(axis=-1, keepdims=True)
    inv_std = 1.0 / np.sqrt(var + eps)
    xhat = xc * inv_std
    return gamma * xhat + beta, (xhat, inv_std, gamma)


def layer_norm_backward(dy, cache):
    xhat, inv_std, gamma = cache
    dgamma = _flat_rows(dy * xhat).sum(axis=0)
    dbeta = _flat_rows(dy).sum(axis=0)
    dxhat = dy * gamma
    dx = inv_std * (
        dxhat
        - dxhat.mean(axis=-1, keepdims=True)
        - xhat * (dxhat * xhat).mean(axis=-1, keepdims=True)
    )
    return dx, dgamma, dbeta


# -- attention --------------------------------------------------------------

def _split_heads(x, heads):
    *lead, n, dim = x.shape
    return x.reshape(*lead, n, heads, dim // heads).swapaxes(-2, -3)


def _merge_heads(x):
    *lead, heads, n, hd = x.shape
    return x.swapaxes(-2, -3).reshape(*lead, n, heads * hd)


def multi_head_attention_forward(q_in, kv_in, wq, wk, wv, wo, heads):
    """Scaled dot-product attention with ``heads`` heads of width ``D / heads``.

    Self-attention is the case ``q_in is kv_in``.
    """
    dim = q_in.shape[-1]
    if heads < 1 or dim % heads:
        raise ConfigurationError(f"attention: {heads} heads do not divide width {dim}")
    if kv_in.shape[-1] != dim or q_in.shape[:-2] != kv_in.shape[:-2]:
        raise DimensionError(
            f"attention: query shape {q_in.shape} incompatible with key/value shape {kv_in.shape}"
        )
    for name, w in (("wq", wq), ("wk", wk), ("wv", wv), ("wo", wo)):
        if w.shape != (dim, dim):
            raise DimensionError(f"attention: {name} has shape {w.shape}, expected {(dim, dim)}")
    scale = 1.0 / math.sqrt(dim // heads)
    q = _split_heads(q_in @ wq, heads)
    k = _split_heads(kv_in @ wk, heads)
    v = _split_heads(kv_in @ wv, heads)
    probs, _ = softmax_rows_forward((q @ k.swapaxes(-1, -2)) * scale)
    ctx = _merge_heads(probs @ v)
    out = ctx @ wo
    return out, (q_in, kv_in, wq, wk, wv, wo, heads, scale, q, k, v, probs, ctx)


def multi_head_attention_backward(dout, cache):
    """Returns ``(dq_in, dkv_in, dwq, dwk, dwv, dwo)``."""
    q_in, kv_in, wq, wk, wv, wo, heads, scale, q, k, v, probs, ctx = cache
    dwo = weight_grad(ctx, dout)
    dctx = _split_heads(dout @ wo.T, heads)
    dprobs = dctx @ v.swapaxes(-1, -2)
    dv = probs.swapaxes(-1, -2) @ dctx
    dscores = softmax_rows_backward(dprobs, probs) * scale
    dq = _merge_heads(dscores @ k)
    dk = _merge_heads(dscores.swapaxes(-1, -2) @ q)
    dv = _merge_heads(dv)
    dwq = weight_grad(q_in, dq)
    dwk = weight_grad(kv_in, dk)
    dwv = weight_grad(kv_in, dv)
    dq_in = dq @ wq.T
    dkv_in = dk @ wk.T + dv @ wv.T
    return dq_in, dkv_in, dwq, dwk, dwv, dwo


# -- layer mixing -----------------------------------------------------------

def conv1x1_channels_forward(x, kernel):
    """Pointwise convolution over the channel (layer) axis ``-3``.

    ``out[..., c, n, d] = sum_i kernel[c, i] * x[..., i, n, d]``; no bias.
    """
    if x.ndim < 3 or kernel.ndim != 2 or kernel.shape[1] != x.shape[-3]:
        raise DimensionError(
            f"conv1x1_channels: input shape {x.shape} does not match kernel shape {kernel.shape}"
        )
    out = np.moveaxis(np.tensordot(kernel, x, axes=([1], [x.ndim - 3])), 0, -3)
    return out, (x, kernel)


def conv1x1_channels_backward(dout, cache):
    x, kernel = cache
    dx = np.moveaxis(np.tensordot(kernel.T, dout, axes=([1], [dout.ndim - 3])), 0, -3)
    cin, cout = kernel.shape[1], kernel.shape[0]
    xm = np.moveaxis(x, -3, 0).reshape(cin, -1)
    dm = np.moveaxis(dout, -3, 0).reshape(cout, -1)
    return dx, dm @ xm.T


# -- forward-only conveniences ----------------------------------------------

def linear(x, w, b=None):
    return linear_forward(x, w, b)[0]


def gelu(x):
    return gelu_forward(x)[0]


def layer_norm(x, gamma, beta, eps=1e-5):
    return layer_norm_forward(x, gamma, beta, eps)[0]


def softmax_rows(x):
    return softmax_rows_forward(x)[0]


def multi_head_attention(q_in, kv_in, wq, wk, wv, wo, heads):
    return multi_head_attention_forward(q_in, kv_in, wq, wk, wv, wo, heads)[0]


def conv1x1_channels(x, kernel):
    return conv1x1_channels_forward(x, kernel)[0]
