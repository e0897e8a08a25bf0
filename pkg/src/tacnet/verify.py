"""End-to-end gradient verification of the connector."""
from __future__ import annotations

import numpy as np

from .config import TacConfig
from .nn.gradcheck import GradCheckReport, grad_check
from .nn.params import ParamStore
from .tac import tac_backward, tac_forward, tac_forward_cached, tac_init


def tac_gradcheck(config: TacConfig, h: float = 1e-5, tol: float = 1e-4,
                  params: ParamStore | None = None, bias_scale: float = 0.0) -> GradCheckReport:
    """Check every connector parameter on a random pair against central differences.

    The loss is a fixed random projection of the output, so every output
    element carries gradient. ``bias_scale > 0`` replaces the zero-initialised
    prior bias with random values so the similarity-scaling path is exercised.
    """
    rng = np.random.default_rng([config.seed, 11])
    params = params.copy() if params is not None else tac_init(config)
    if bias_scale:
        params["tfm.prefix.b_prior"] = bias_scale * rng.standard_normal(config.enc_dim)
    shape = (config.layers, config.n_tokens, config.enc_dim)
    curr = rng.standard_normal(shape)
    prior = curr + rng.standard_normal(shape)
    proj = rng.standard_normal((config.n_tokens, config.llm_dim))

    def loss(store):
        return float((tac_forward(curr, prior, store, config) * proj).sum())

    _, cache = tac_forward_cached(curr, prior, params, config)
    params.zero_grad()
    tac_backward(proj, cache, params, config)
    return grad_check(loss, params, h=h, tol=tol)
