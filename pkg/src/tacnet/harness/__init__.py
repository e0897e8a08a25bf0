"""Synthetic pairs, toy training, swap evaluation and heatmaps."""
from .heatmap import decode_pgm, emit_heatmap, encode_pgm, heatmap_image, token_weights
from .synthetic import LABELS, LabeledPair, PairSet, SyntheticPairSpec, gen_pairs, lesion_pattern
from .training import (
    Adam,
    SwapReport,
    ToyTrainConfig,
    TrainResult,
    eval_swap,
    loss_and_grad,
    predict,
    probe_init,
    train_toy,
)

__all__ = [
    "Adam",
    "LABELS",
    "LabeledPair",
    "PairSet",
    "SwapReport",
    "SyntheticPairSpec",
    "ToyTrainConfig",
    "TrainResult",
    "decode_pgm",
    "emit_heatmap",
    "encode_pgm",
    "eval_swap",
    "gen_pairs",
    "heatmap_image",
    "lesion_pattern",
    "loss_and_grad",
    "predict",
    "probe_init",
    "token_weights",
    "train_toy",
]
