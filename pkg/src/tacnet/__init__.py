"""Temporal alignment connector for paired chest X-ray features.

A layerwise feature extractor compresses every encoder hidden layer into a
single patch plane per image; a temporal fusion module then weighs the
current image against the prior one and projects into the language-model
width. Includes a temporal-entity F1 metric for generated reports.
"""
from .config import TacConfig, factor_chain
from .checkpoint import load_checkpoint, read_tensors, save_checkpoint, write_tensors
from .estimators import TemporalAlignmentConnector, TemporalDirectionClassifier
from .metrics import TemporalKeywordList, TemporalScore, corpus_f1, extract_entities, temporal_f1
from .prompts import ReportSections, build_prompt
from .tac import param_shapes, tac_backward, tac_forward, tac_forward_cached, tac_init

__version__ = "0.1.0"

__all__ = [
    "ReportSections",
    "TacConfig",
    "TemporalAlignmentConnector",
    "TemporalDirectionClassifier",
    "TemporalKeywordList",
    "TemporalScore",
    "build_prompt",
    "corpus_f1",
    "extract_entities",
    "factor_chain",
    "load_checkpoint",
    "param_shapes",
    "read_tensors",
    "save_checkpoint",
    "tac_backward",
    "tac_forward",
    "tac_forward_cached",
    "tac_init",
    "temporal_f1",
    "write_tensors",
]
