"""Synthetic current/prior layer-stack pairs with a known direction of change.

Each sample draws a shared base plane, spreads it over the encoder layers
with a small per-layer perturbation, and adds a random pre-existing amount
of the lesion pattern. The prior is the base plus noise; the current image
additionally carries ``+delta`` (worsened), nothing (stable) or ``-delta``
(improved) of the lesion pattern. Because the pre-existing amount varies per
sample, the direction is only recoverable by comparing the two images.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator

import numpy as np

from ..config import TacConfig
from ..errors import ConfigurationError

LABELS = ("improved", "stable", "worsened")
DIRECTION = np.array([-1.0, 0.0, 1.0])
STABLE = 1


def opposite(label: int) -> int:
    return 2 - label


@dataclass(frozen=True)
class SyntheticPairSpec:
    config: TacConfig = field(default_factory=lambda: TacConfig(grid=4, enc_dim=32, llm_dim=64, heads=4))
    n_train: int = 1500
    n_test: int = 300
    delta_scale: float = 1.0
    noise_scale: float = 0.1
    seed: int = 0
    severity_scale: float = 2.0
    layer_spread: float = 0.25
    lesion_fraction: float = 0.25

    def validate(self) -> None:
        if not self.delta_scale > self.noise_scale > 0:
            raise ConfigurationError(
                f"need delta_scale > noise_scale > 0, got {self.delta_scale} and {self.noise_scale}"
            )
        if self.n_train < 3 or self.n_test < 3:
            raise ConfigurationError("need at least one pair per class in each split")
        if not 0 < self.lesion_fraction <= 1:
            raise ConfigurationError("lesion_fraction must lie in (0, 1]")
        if self.severity_scale < 0 or self.layer_spread < 0:
            raise ConfigurationError("severity_scale and layer_spread must be non-negative")


@dataclass(frozen=True)
class LabeledPair:
    curr: np.ndarray
    prior: np.ndarray
    label: int

    @property
    def direction(self) -> str:
        return LABELS[self.label]


@dataclass
class PairSet:
    """Column-stored pairs: ``curr``/``prior`` are ``(n, L, N, D)``, ``labels`` ``(n,)``."""

    curr: np.ndarray
    prior: np.ndarray
    labels: np.ndarray

    def __len__(self) -> int:
        return len(self.labels)

    def __getitem__(self, i) -> LabeledPair:
        return LabeledPair(self.curr[i], self.prior[i], int(self.labels[i]))

    def __iter__(self) -> Iterator[LabeledPair]:
        return (self[i] for i in range(len(self)))

    def swapped(self) -> "PairSet":
        """Current and prior exchanged, labels flipped to match."""
        return PairSet(self.prior, self.curr, 2 - self.labels)

    def subset(self, idx) -> "PairSet":
        return PairSet(self.curr[idx], self.prior[idx], self.labels[idx])

    def to_tensors(self) -> dict[str, np.ndarray]:
        return {"curr": self.curr, "prior": self.prior, "labels": self.labels.astype(np.float64)}

    @classmethod
    def from_tensors(cls, tensors) -> "PairSet":
        labels = tensors["labels"]
        if not np.all(np.isin(labels, (0, 1, 2))):
            raise ConfigurationError("labels must be 0 (improved), 1 (stable) or 2 (worsened)")
        return cls(tensors["curr"], tensors["prior"], labels.astype(np.int64))


def lesion_pattern(spec: SyntheticPairSpec) -> np.ndarray:
    """Fixed ``(N, D)`` pattern supported on a contiguous block of tokens."""
    cfg = spec.config
    rng = np.random.default_rng([spec.seed, 0])
    n = cfg.n_tokens
    width = max(1, int(round(spec.lesion_fraction * n)))
    start = int(rng.integers(0, n - width + 1))
    feature = rng.standard_normal(cfg.enc_dim)
    feature /= np.sqrt(np.mean(feature**2))
    pattern = np.zeros((n, cfg.enc_dim))
    pattern[start:start + width] = feature
    return pattern


def _balanced_labels(rng, n: int) -> np.ndarray:
    labels = np.arange(n) % 3
    rng.shuffle(labels)
    return labels


def _generate(spec: SyntheticPairSpec, rng, n: int, pattern: np.ndarray) -> PairSet:
    cfg = spec.config
    shape = (n, cfg.layers, cfg.n_tokens, cfg.enc_dim)
    labels = _balanced_labels(rng, n)
    base = rng.standard_normal((n, 1, cfg.n_tokens, cfg.enc_dim))
    base = base + spec.layer_spread * rng.standard_normal(shape)
    severity = spec.severity_scale * spec.delta_scale * rng.standard_normal(n)
    base = base + severity[:, None, None, None] * pattern
    prior = base + spec.noise_scale * rng.standard_normal(shape)
    step = (DIRECTION[labels] * spec.delta_scale)[:, None, None, None] * pattern
    curr = base + step + spec.noise_scale * rng.standard_normal(shape)
    return PairSet(curr, prior, labels)


def gen_pairs(spec: SyntheticPairSpec, strict: bool = True) -> tuple[PairSet, PairSet]:
    """Generate ``(train, test)`` splits; ``strict=False`` skips the signal/noise checks."""
    if strict:
        spec.validate()
    pattern = lesion_pattern(spec)
    rng = np.random.default_rng([spec.seed, 1])
    train = _generate(spec, rng, spec.n_train, pattern)
    test = _generate(spec, rng, spec.n_test, pattern)
    return train, test
