"""Toy first-stage training: connector plus a linear direction probe.

The encoder is replaced by synthetic layer stacks and the language model by
a linear probe on the token-mean of the connector output, trained with
cross-entropy over the three change directions.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from ..config import TacConfig
from ..errors import TrainingError
from ..nn.params import ParamStore
from ..tac import tac_backward, tac_forward_cached
from .synthetic import STABLE, PairSet

log = logging.getLogger(__name__)

N_CLASSES = 3


@dataclass(frozen=True)
class ToyTrainConfig:
    epochs: int = 300
    batch_size: int = 50
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    seed: int = 0
    stop_accuracy: float | None = None

    def __post_init__(self):
        if self.epochs < 0 or self.batch_size < 1 or self.lr < 0:
            raise ValueError("epochs >= 0, batch_size >= 1 and lr >= 0 required")


def probe_init(llm_dim: int, seed: int) -> ParamStore:
    rng = np.random.default_rng([seed, 2])
    limit = math.sqrt(6.0 / (llm_dim + N_CLASSES))
    return ParamStore({
        "probe.w": rng.uniform(-limit, limit, (llm_dim, N_CLASSES)),
        "probe.b": np.zeros(N_CLASSES),
    })


def _log_softmax(logits):
    z = logits - logits.max(axis=-1, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=-1, keepdims=True))


def probe_logits(z, probe: ParamStore):
    return z.mean(axis=-2) @ probe["probe.w"] + probe["probe.b"]


def loss_and_grad(curr, prior, labels, tac: ParamStore, probe: ParamStore, config: TacConfig):
    """Mean cross-entropy of the probe; accumulates gradients into both stores."""
    z, cache = tac_forward_cached(curr, prior, tac, config)
    pooled = z.mean(axis=-2)
    logp = _log_softmax(pooled @ probe["probe.w"] + probe["probe.b"])
    n = len(labels)
    loss = -float(logp[np.arange(n), labels].mean())
    dlogits = np.exp(logp)
    dlogits[np.arange(n), labels] -= 1.0
    dlogits /= n
    probe.accumulate("probe.w", pooled.T @ dlogits)
    probe.accumulate("probe.b", dlogits.sum(axis=0))
    dpooled = dlogits @ probe["probe.w"].T
    dz = np.broadcast_to(dpooled[:, None, :] / z.shape[-2], z.shape)
    tac_backward(dz, cache, tac, config)
    return loss, logp


class Adam:
    """Bias-corrected first/second moment adaptive step."""

    def __init__(self, stores, lr, beta1=0.9, beta2=0.999, eps=1e-8):
        self.stores = list(stores)
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.t = 0
        self.m = {}
        self.v = {}
        for s in self.stores:
            for p in s.params():
                self.m[id(p)] = np.zeros_like(p.value)
                self.v[id(p)] = np.zeros_like(p.value)

    def step(self) -> None:
        self.t += 1
        c1 = 1.0 - self.beta1**self.t
        c2 = 1.0 - self.beta2**self.t
        for s in self.stores:
            for p in s.params():
                m, v = self.m[id(p)], self.v[id(p)]
                m *= self.beta1
                m += (1.0 - self.beta1) * p.grad
                v *= self.beta2
                v += (1.0 - self.beta2) * p.grad * p.grad
                p.value -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)


def predict(pairs: PairSet, tac: ParamStore, probe: ParamStore, config: TacConfig,
            swap: bool = False, batch_size: int = 100) -> np.ndarray:
    """Predicted class per pair; ``swap=True`` feeds (prior, curr) instead."""
    out = []
    for i in range(0, len(pairs), batch_size):
        c, p = pairs.curr[i:i + batch_size], pairs.prior[i:i + batch_size]
        if swap:
            c, p = p, c
        z, _ = tac_forward_cached(c, p, tac, config)
        out.append(np.argmax(probe_logits(z, probe), axis=-1))
    return np.concatenate(out) if out else np.zeros(0, dtype=np.int64)


def mean_loss(pairs: PairSet, tac, probe, config, batch_size: int = 100) -> float:
    total = 0.0
    for i in range(0, len(pairs), batch_size):
        sl = slice(i, i + batch_size)
        z, _ = tac_forward_cached(pairs.curr[sl], pairs.prior[sl], tac, config)
        logp = _log_softmax(probe_logits(z, probe))
        y = pairs.labels[sl]
        total -= float(logp[np.arange(len(y)), y].sum())
    return total / len(pairs)


@dataclass
class TrainResult:
    tac: ParamStore
    probe: ParamStore
    loss_curve: list[float] = field(default_factory=list)
    train_accuracy: float = float("nan")
    epochs_run: int = 0


def train_toy(pairs: PairSet, tac: ParamStore, config: TacConfig, train_cfg: ToyTrainConfig,
              probe: ParamStore | None = None) -> TrainResult:
    """Minimise probe cross-entropy over the pairs; ``tac`` is copied, not mutated.

    ``loss_curve[0]`` is the training loss before any update, later entries
    are per-epoch means of the minibatch losses.
    """
    counts = np.bincount(pairs.labels, minlength=N_CLASSES)
    if counts.max() - counts.min() > 1:
        raise ValueError(f"labels are not balanced: {counts.tolist()}")
    tac = tac.copy()
    probe = probe.copy() if probe is not None else probe_init(config.llm_dim, train_cfg.seed)
    opt = Adam([tac, probe], train_cfg.lr, train_cfg.beta1, train_cfg.beta2, train_cfg.adam_eps)
    rng = np.random.default_rng([train_cfg.seed, 3])
    curve = [mean_loss(pairs, tac, probe, config)]
    n = len(pairs)
    step = 0
    epoch = 0
    acc = float("nan")
    for epoch in range(1, train_cfg.epochs + 1):
        order = rng.permutation(n)
        losses = []
        for i in range(0, n, train_cfg.batch_size):
            idx = np.sort(order[i:i + train_cfg.batch_size])
            tac.zero_grad()
            probe.zero_grad()
            loss, _ = loss_and_grad(pairs.curr[idx], pairs.prior[idx], pairs.labels[idx],
                                    tac, probe, config)
            step += 1
            if not math.isfinite(loss):
                raise TrainingError(f"loss became {loss} at step {step} (epoch {epoch})")
            opt.step()
            losses.append(loss)
        curve.append(float(np.mean(losses)))
        log.info("epoch %d loss %.5f", epoch, curve[-1])
        if train_cfg.stop_accuracy is not None:
            acc = float(np.mean(predict(pairs, tac, probe, config) == pairs.labels))
            if acc >= train_cfg.stop_accuracy:
                break
    if train_cfg.stop_accuracy is None or math.isnan(acc):
        acc = float(np.mean(predict(pairs, tac, probe, config) == pairs.labels)) if n else acc
    return TrainResult(tac, probe, curve, acc, epoch)


@dataclass
class SwapReport:
    accuracy: float
    flip_rate: float
    n_pairs: int
    n_nonstable: int
    chance_flip_rate: float
    predictions: np.ndarray
    swapped_predictions: np.ndarray

    def lines(self) -> list[str]:
        return [
            f"accuracy\t{self.accuracy:.6f}",
            f"flip_rate\t{self.flip_rate:.6f}",
            f"chance_flip_rate\t{self.chance_flip_rate:.6f}",
            f"pairs\t{self.n_pairs}",
            f"nonstable_pairs\t{self.n_nonstable}",
        ]


def eval_swap(pairs: PairSet, tac: ParamStore, probe: ParamStore, config: TacConfig) -> SwapReport:
    """Direction accuracy, and how often swapping the images flips the prediction.

    A flip means the swapped prediction is the opposite direction of the
    original (improved <-> worsened); only truly non-stable pairs count.
    ``chance_flip_rate`` is the flip rate expected if the swapped predictions
    were independent of the original ones, given both prediction marginals.
    """
    pred = predict(pairs, tac, probe, config)
    pred_sw = predict(pairs, tac, probe, config, swap=True)
    mask = pairs.labels != STABLE
    po, ps = pred[mask], pred_sw[mask]
    flips = (po != STABLE) & (ps == 2 - po)
    k = int(mask.sum())
    flip_rate = float(flips.mean()) if k else float("nan")
    fo = np.bincount(po, minlength=N_CLASSES) / max(k, 1)
    fs = np.bincount(ps, minlength=N_CLASSES) / max(k, 1)
    chance = float(fo[0] * fs[2] + fo[2] * fs[0])
    return SwapReport(
        accuracy=float(np.mean(pred == pairs.labels)),
        flip_rate=flip_rate,
        n_pairs=len(pairs),
        n_nonstable=k,
        chance_flip_rate=chance,
        predictions=pred,
        swapped_predictions=pred_sw,
    )
