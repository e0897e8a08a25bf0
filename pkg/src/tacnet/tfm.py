"""Temporal fusion module.

Fuses current-image features (the query stream and residual backbone) with
prior-image features (the key/value stream). Before fusion the prior stream
receives a trainable bias whose strength grows with the cosine similarity
of the two images, so a copied "dummy" prior gets the full bias.

Parameter layout for one block (keys of the mapping passed to
:func:`tfm_block_forward`)::

    self.{wq,wk,wv,wo}     (D, D)   shared by both streams
    cross.{wq,wk,wv,wo}    (D, D)   query = current, key/value = prior
    ln_self.{gamma,beta}   (D,)     shared by both self-attention outputs
    ln_cross.{gamma,beta}  (D,)
    ln_out.{gamma,beta}    (D,)
    mlp.{w1,b1,w2,b2}      D -> 4D -> D
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .errors import DimensionError
from .nn import ops

log = logging.getLogger(__name__)

LN_EPS = 1e-5

BlockParams = Mapping[str, np.ndarray]


# -- prior-image prefix bias --------------------------------------------------

def prefix_scale_forward(curr, prior, llm_dim: int):
    """``((cos(curr, prior) + 1) / 2) ** llm_dim**0.25`` per sample.

    The cosine is taken between the ``(N, D)`` planes flattened to vectors;
    leading axes are treated as a batch.
    """
    curr = np.asarray(curr, dtype=np.float64)
    prior = np.asarray(prior, dtype=np.float64)
    if curr.shape != prior.shape:
        raise DimensionError(f"prefix_scale: shapes differ, {curr.shape} vs {prior.shape}")
    exponent = float(llm_dim) ** 0.25
    dot = (curr * prior).sum(axis=(-2, -1))
    sq_c = (curr * curr).sum(axis=(-2, -1))
    sq_p = (prior * prior).sum(axis=(-2, -1))
    denom_sq = sq_c * sq_p
    zero = denom_sq == 0.0
    if np.any(zero):
        log.warning("prefix_scale: zero-norm features, cosine taken as 0")
    denom = np.sqrt(np.where(zero, 1.0, denom_sq))
    cos = np.where(zero, 0.0, np.clip(dot / denom, -1.0, 1.0))
    half = (cos + 1.0) * 0.5
    scale = half**exponent
    return scale, (curr, prior, cos, half, exponent, sq_c, sq_p, denom, zero)


def prefix_scale_backward(dscale, cache):
    """Returns ``(dcurr, dprior)``."""
    curr, prior, cos, half, exponent, sq_c, sq_p, denom, zero = cache
    dcos = np.asarray(dscale) * exponent * half ** (exponent - 1.0) * 0.5
    dcos = np.where(zero, 0.0, dcos)[..., None, None]
    inv = (1.0 / denom)[..., None, None]
    c = cos[..., None, None]
    sc = np.where(zero, 1.0, sq_c)[..., None, None]
    sp = np.where(zero, 1.0, sq_p)[..., None, None]
    dcurr = dcos * (prior * inv - c * curr / sc)
    dprior = dcos * (curr * inv - c * prior / sp)
    return dcurr, dprior


def prefix_scale(curr, prior, llm_dim: int):
    return prefix_scale_forward(curr, prior, llm_dim)[0]


def apply_prefix(prior, b_prior, scale):
    """Add ``scale * b_prior`` to every token row of ``prior``."""
    return prior + np.asarray(scale)[..., None, None] * b_prior


# -- transformer block --------------------------------------------------------

def _attn(x_q, x_kv, p, prefix, heads):
    return ops.multi_head_attention_forward(
        x_q, x_kv, p[prefix + "wq"], p[prefix + "wk"], p[prefix + "wv"], p[prefix + "wo"], heads
    )


def _ln(x, p, prefix):
    return ops.layer_norm_forward(x, p[prefix + "gamma"], p[prefix + "beta"], LN_EPS)


def tfm_block_forward(curr, prior_biased, p: BlockParams, heads: int):
    if curr.shape != prior_biased.shape:
        raise DimensionError(
            f"tfm_block: current {curr.shape} and prior {prior_biased.shape} differ"
        )
    sa_c, c_sa_c = _attn(curr, curr, p, "self.", heads)
    t_curr, c_ln1 = _ln(curr + sa_c, p, "ln_self.")
    sa_p, c_sa_p = _attn(prior_biased, prior_biased, p, "self.", heads)
    t_prior, c_ln2 = _ln(prior_biased + sa_p, p, "ln_self.")
    ca, c_ca = _attn(t_curr, t_prior, p, "cross.", heads)
    t_cross, c_ln3 = _ln(t_curr + ca, p, "ln_cross.")
    h, c_m1 = ops.linear_forward(t_cross, p["mlp.w1"], p["mlp.b1"])
    g, c_g = ops.gelu_forward(h)
    m, c_m2 = ops.linear_forward(g, p["mlp.w2"], p["mlp.b2"])
    out, c_ln4 = _ln(curr + m, p, "ln_out.")
    cache = (c_sa_c, c_ln1, c_sa_p, c_ln2, c_ca, c_ln3, c_m1, c_g, c_m2, c_ln4)
    return out, cache


def _put_attn(grads, prefix, dwq, dwk, dwv, dwo):
    for k, g in zip(("wq", "wk", "wv", "wo"), (dwq, dwk, dwv, dwo)):
        key = prefix + k
        grads[key] = grads[key] + g if key in grads else g


def _put_ln(grads, prefix, dgamma, dbeta):
    for k, g in (("gamma", dgamma), ("beta", dbeta)):
        key = prefix + k
        grads[key] = grads[key] + g if key in grads else g


def tfm_block_backward(dout, cache):
    """Returns ``(dcurr, dprior_biased, grads)``."""
    c_sa_c, c_ln1, c_sa_p, c_ln2, c_ca, c_ln3, c_m1, c_g, c_m2, c_ln4 = cache
    grads: dict[str, np.ndarray] = {}

    d4, dg4, db4 = ops.layer_norm_backward(dout, c_ln4)
    _put_ln(grads, "ln_out.", dg4, db4)
    dcurr = d4
    dg, grads["mlp.w2"], grads["mlp.b2"] = ops.linear_backward(d4, c_m2)
    dh = ops.gelu_backward(dg, c_g)
    dt_cross, grads["mlp.w1"], grads["mlp.b1"] = ops.linear_backward(dh, c_m1)

    d3, dg3, db3 = ops.layer_norm_backward(dt_cross, c_ln3)
    _put_ln(grads, "ln_cross.", dg3, db3)
    dq, dkv, *w = ops.multi_head_attention_backward(d3, c_ca)
    _put_attn(grads, "cross.", *w)
    dt_curr = d3 + dq
    dt_prior = dkv

    d2, dg2, db2 = ops.layer_norm_backward(dt_prior, c_ln2)
    _put_ln(grads, "ln_self.", dg2, db2)
    dq, dkv, *w = ops.multi_head_attention_backward(d2, c_sa_p)
    _put_attn(grads, "self.", *w)
    dprior = d2 + dq + dkv

    d1, dg1, db1 = ops.layer_norm_backward(dt_curr, c_ln1)
    _put_ln(grads, "ln_self.", dg1, db1)
    dq, dkv, *w = ops.multi_head_attention_backward(d1, c_sa_c)
    _put_attn(grads, "self.", *w)
    dcurr = dcurr + d1 + dq + dkv
    return dcurr, dprior, grads


def tfm_block(curr, prior_biased, p: BlockParams, heads: int):
    return tfm_block_forward(curr, prior_biased, p, heads)[0]


# -- final projection ---------------------------------------------------------

def mlp_final_forward(x, layers: Sequence[tuple[np.ndarray, np.ndarray]]):
    """Stack of linear layers with GELU between consecutive layers."""
    caches = []
    for i, (w, b) in enumerate(layers):
        x, c = ops.linear_forward(x, w, b)
        caches.append(c)
        if i < len(layers) - 1:
            x, c = ops.gelu_forward(x)
            caches.append(c)
    return x, caches


def mlp_final_backward(dy, caches):
    """Returns ``(dx, [(dw, db) per layer])``."""
    grads = []
    n_layers = (len(caches) + 1) // 2
    for i in reversed(range(n_layers)):
        dy, dw, db = ops.linear_backward(dy, caches[2 * i])
        grads.append((dw, db))
        if i > 0:
            dy = ops.gelu_backward(dy, caches[2 * i - 1])
    return dy, grads[::-1]


# -- full module --------------------------------------------------------------

@dataclass
class TfmParams:
    b_prior: np.ndarray
    blocks: Sequence[BlockParams]
    final: Sequence[tuple[np.ndarray, np.ndarray]]
    llm_dim: int
    heads: int


def tfm_forward(curr, prior, params: TfmParams):
    """Fuse ``(..., N, D)`` current/prior features into ``(..., N, llm_dim)``."""
    if curr.shape != prior.shape:
        raise DimensionError(f"tfm: current {curr.shape} and prior {prior.shape} differ")
    scale, c_scale = prefix_scale_forward(curr, prior, params.llm_dim)
    prior_b = apply_prefix(prior, params.b_prior, scale)
    x = curr
    c_blocks = []
    for bp in params.blocks:
        x, c = tfm_block_forward(x, prior_b, bp, params.heads)
        c_blocks.append(c)
    z, c_final = mlp_final_forward(x, params.final)
    return z, (c_scale, scale, params.b_prior, c_blocks, c_final)


@dataclass
class TfmGrads:
    b_prior: np.ndarray
    blocks: list[dict[str, np.ndarray]]
    final: list[tuple[np.ndarray, np.ndarray]]


def tfm_backward(dz, cache):
    """Returns ``(dcurr, dprior, TfmGrads)``."""
    c_scale, scale, b_prior, c_blocks, c_final = cache
    dx, final_grads = mlp_final_backward(dz, c_final)
    dprior_b = np.zeros_like(dx)
    block_grads = []
    for c in reversed(c_blocks):
        dx, dpb, g = tfm_block_backward(dx, c)
        dprior_b += dpb
        block_grads.append(g)
    block_grads.reverse()
    s = np.asarray(scale)[..., None, None]
    db_prior = (s * dprior_b).reshape(-1, dprior_b.shape[-1]).sum(axis=0)
    dscale = (dprior_b * b_prior).sum(axis=(-2, -1))
    dc, dp = prefix_scale_backward(dscale, c_scale)
    return dx + dc, dprior_b + dp, TfmGrads(db_prior, block_grads, final_grads)


def tfm(curr, prior, params: TfmParams):
    return tfm_forward(curr, prior, params)[0]
