"""scikit-learn compatible wrappers around the connector."""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .config import TacConfig
from .harness.synthetic import LABELS, PairSet
from .harness.training import (
    ToyTrainConfig,
    eval_swap,
    predict,
    probe_logits,
    train_toy,
)
from .tac import tac_forward, tac_forward_cached, tac_init
from .validation import check_labels, check_pairs


class _ConnectorParams:
    def _tac_config(self) -> TacConfig:
        return TacConfig(
            layers=self.layers,
            grid=self.grid,
            enc_dim=self.enc_dim,
            llm_dim=self.llm_dim,
            se_reduction=self.se_reduction,
            heads=self.heads,
            depth=self.depth,
            seed=self.random_state,
        )


class TemporalAlignmentConnector(_ConnectorParams, TransformerMixin, BaseEstimator):
    """Maps image pairs to connector tokens ``(n, N, llm_dim)``.

    ``fit`` only validates the input and draws the seeded initial weights;
    use :class:`TemporalDirectionClassifier` to train them.
    """

    def __init__(self, layers=12, grid=37, enc_dim=768, llm_dim=4096, se_reduction=4,
                 heads=8, depth=2, random_state=0):
        self.layers = layers
        self.grid = grid
        self.enc_dim = enc_dim
        self.llm_dim = llm_dim
        self.se_reduction = se_reduction
        self.heads = heads
        self.depth = depth
        self.random_state = random_state

    def fit(self, X, y=None):
        self.config_ = self._tac_config()
        check_pairs(X, self.config_)
        self.params_ = tac_init(self.config_)
        return self

    def transform(self, X):
        check_is_fitted(self, "params_")
        curr, prior = check_pairs(X, self.config_)
        return tac_forward(curr, prior, self.params_, self.config_)


class TemporalDirectionClassifier(_ConnectorParams, ClassifierMixin, BaseEstimator):
    """Connector plus linear probe predicting improved / stable / worsened."""

    def __init__(self, layers=12, grid=4, enc_dim=32, llm_dim=64, se_reduction=4, heads=4,
                 depth=2, epochs=20, batch_size=50, learning_rate=1e-3, stop_accuracy=None,
                 random_state=0):
        self.layers = layers
        self.grid = grid
        self.enc_dim = enc_dim
        self.llm_dim = llm_dim
        self.se_reduction = se_reduction
        self.heads = heads
        self.depth = depth
        self.epochs = epochs
        self.batch_size = batch_size
        self.learning_rate = learning_rate
        self.stop_accuracy = stop_accuracy
        self.random_state = random_state

    def _pairs(self, X, y=None):
        curr, prior = check_pairs(X, self.config_)
        if prior is None:
            prior = curr.copy()
        labels = np.zeros(len(curr), dtype=np.int64) if y is None else check_labels(y, len(curr))
        return PairSet(curr, prior, labels)

    def fit(self, X, y):
        self.config_ = self._tac_config()
        y_arr = np.asarray(y)
        self.classes_ = np.array(LABELS) if y_arr.dtype.kind in "USO" else np.arange(3)
        pairs = self._pairs(X, y)
        train_cfg = ToyTrainConfig(
            epochs=self.epochs,
            batch_size=self.batch_size,
            lr=self.learning_rate,
            seed=self.random_state,
            stop_accuracy=self.stop_accuracy,
        )
        res = train_toy(pairs, tac_init(self.config_), self.config_, train_cfg)
        self.tac_params_ = res.tac
        self.probe_params_ = res.probe
        self.loss_curve_ = res.loss_curve
        self.n_epochs_ = res.epochs_run
        return self

    def predict_proba(self, X):
        check_is_fitted(self, "tac_params_")
        pairs = self._pairs(X)
        out = []
        for i in range(0, len(pairs), 100):
            z, _ = tac_forward_cached(pairs.curr[i:i + 100], pairs.prior[i:i + 100],
                                      self.tac_params_, self.config_)
            logits = probe_logits(z, self.probe_params_)
            e = np.exp(logits - logits.max(axis=1, keepdims=True))
            out.append(e / e.sum(axis=1, keepdims=True))
        return np.concatenate(out)

    def predict(self, X):
        check_is_fitted(self, "tac_params_")
        return self.classes_[predict(self._pairs(X), self.tac_params_, self.probe_params_, self.config_)]

    def swap_report(self, X, y):
        check_is_fitted(self, "tac_params_")
        return eval_swap(self._pairs(X, y), self.tac_params_, self.probe_params_, self.config_)
