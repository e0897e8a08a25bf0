"""Temporal alignment connector: shared layer compressor followed by fusion.

``tac_forward(curr, prior)`` compresses both layer stacks with the same LFE
weights and fuses them with the TFM. A missing prior is replaced by a copy of
the current stack before compression.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import TacConfig, se_hidden_width
from .errors import DimensionError, NumericError
from .lfe import lfe_backward, lfe_forward
from .nn.params import ParamStore
from .tfm import TfmParams, tfm_backward, tfm_forward

_ATTN = ("wq", "wk", "wv", "wo")
_LNS = ("ln_self", "ln_cross", "ln_out")


def param_shapes(config: TacConfig) -> dict[str, tuple[int, ...]]:
    """Ordered name -> shape layout of every connector parameter."""
    shapes: dict[str, tuple[int, ...]] = {}
    chain = config.chain
    for i, (cin, cout) in enumerate(zip(chain[:-1], chain[1:])):
        h = se_hidden_width(cin, config.se_reduction)
        shapes[f"lfe.stage{i}.se.w1"] = (cin, h)
        shapes[f"lfe.stage{i}.se.w2"] = (h, cin)
        shapes[f"lfe.stage{i}.mix"] = (cout, cin)
    dim, llm = config.enc_dim, config.llm_dim
    shapes["tfm.prefix.b_prior"] = (dim,)
    for b in range(config.depth):
        pre = f"tfm.block{b}."
        for kind in ("self", "cross"):
            for w in _ATTN:
                shapes[f"{pre}{kind}.{w}"] = (dim, dim)
        for ln in _LNS:
            shapes[f"{pre}{ln}.gamma"] = (dim,)
            shapes[f"{pre}{ln}.beta"] = (dim,)
        shapes[pre + "mlp.w1"] = (dim, 4 * dim)
        shapes[pre + "mlp.b1"] = (4 * dim,)
        shapes[pre + "mlp.w2"] = (4 * dim, dim)
        shapes[pre + "mlp.b2"] = (dim,)
    widths = [dim, llm, llm, llm, llm]
    for k in range(4):
        shapes[f"tfm.final.w{k}"] = (widths[k], widths[k + 1])
        shapes[f"tfm.final.b{k}"] = (widths[k + 1],)
    return shapes


def _glorot(rng, shape):
    limit = np.sqrt(6.0 / (shape[0] + shape[1]))
    return rng.uniform(-limit, limit, size=shape)


def tac_init(config: TacConfig) -> ParamStore:
    """Seeded Glorot-uniform weights; zero biases and b_prior; unit LN gains."""
    rng = np.random.default_rng(config.seed)
    store = ParamStore()
    for name, shape in param_shapes(config).items():
        leaf = name.rsplit(".", 1)[1]
        if leaf == "gamma":
            value = np.ones(shape)
        elif len(shape) == 1:
            value = np.zeros(shape)
        else:
            value = _glorot(rng, shape)
        store.add(name, value)
    return store


def lfe_stages(params: ParamStore, config: TacConfig) -> list[dict[str, np.ndarray]]:
    n = len(config.chain) - 1
    return [
        {k: params[f"lfe.stage{i}.{k}"] for k in ("se.w1", "se.w2", "mix")}
        for i in range(n)
    ]


def tfm_params(params: ParamStore, config: TacConfig) -> TfmParams:
    blocks = []
    for b in range(config.depth):
        pre = f"tfm.block{b}."
        blocks.append({n[len(pre):]: params[n] for n in params if n.startswith(pre)})
    final = [(params[f"tfm.final.w{k}"], params[f"tfm.final.b{k}"]) for k in range(4)]
    return TfmParams(
        b_prior=params["tfm.prefix.b_prior"],
        blocks=blocks,
        final=final,
        llm_dim=config.llm_dim,
        heads=config.heads,
    )


_AXES = ("layers", "tokens", "features")


def check_stack(stack, config: TacConfig, what: str = "stack") -> np.ndarray:
    stack = np.asarray(stack, dtype=np.float64)
    if stack.ndim < 3:
        raise DimensionError(f"{what}: expected (..., L, N, D), got shape {stack.shape}")
    expected = (config.layers, config.n_tokens, config.enc_dim)
    for axis, got, want in zip(_AXES, stack.shape[-3:], expected):
        if got != want:
            raise DimensionError(f"{what}: {axis} axis has extent {got}, config expects {want}")
    if not np.all(np.isfinite(stack)):
        raise NumericError(f"{what}: contains non-finite values")
    return stack


@dataclass
class TacCache:
    lfe_curr: list
    lfe_prior: list
    fused_curr: np.ndarray
    fused_prior: np.ndarray
    tfm: tuple
    dummy: bool


def tac_forward_cached(curr, prior, params: ParamStore, config: TacConfig):
    """Forward pass returning ``(z, cache)`` for :func:`tac_backward`."""
    curr = check_stack(curr, config, "current stack")
    dummy = prior is None
    if dummy:
        prior = curr.copy()
    else:
        prior = check_stack(prior, config, "prior stack")
        if prior.shape != curr.shape:
            raise DimensionError(
                f"batch axes differ: current {curr.shape[:-3]} vs prior {prior.shape[:-3]}"
            )
    stages = lfe_stages(params, config)
    a_curr, c_curr = lfe_forward(curr, stages)
    a_prior, c_prior = lfe_forward(prior, stages)
    z, c_tfm = tfm_forward(a_curr, a_prior, tfm_params(params, config))
    if dummy:
        scale = c_tfm[1]
        if np.any(np.abs(scale - 1.0) > 1e-12):
            raise NumericError(f"dummy prior produced prefix scale {scale!r}, expected 1")
    return z, TacCache(c_curr, c_prior, a_curr, a_prior, c_tfm, dummy)


def tac_forward(curr, prior, params: ParamStore, config: TacConfig) -> np.ndarray:
    """Connector output ``Z`` of shape ``(..., N, llm_dim)``."""
    return tac_forward_cached(curr, prior, params, config)[0]


def tac_backward(dz, cache: TacCache, params: ParamStore, config: TacConfig):
    """Accumulate parameter gradients into ``params``; returns ``(dcurr, dprior)``."""
    da_curr, da_prior, tg = tfm_backward(dz, cache.tfm)
    dcurr, g_curr = lfe_backward(da_curr, cache.lfe_curr)
    dprior, g_prior = lfe_backward(da_prior, cache.lfe_prior)
    for i, (gc, gp) in enumerate(zip(g_curr, g_prior)):
        for k in gc:
            params.accumulate(f"lfe.stage{i}.{k}", gc[k] + gp[k])
    params.accumulate("tfm.prefix.b_prior", tg.b_prior)
    for b, g in enumerate(tg.blocks):
        for k, v in g.items():
            params.accumulate(f"tfm.block{b}.{k}", v)
    for k, (dw, db) in enumerate(tg.final):
        params.accumulate(f"tfm.final.w{k}", dw)
        params.accumulate(f"tfm.final.b{k}", db)
    if cache.dummy:
        # the prior is a copy of the current stack
        return dcurr + dprior, None
    return dcurr, dprior
