"""Temporal entity F1 for radiology reports.

Temporal entities are keywords describing change over time ("worsened",
"stable", ...). They are matched verbatim on lowercase alphanumeric tokens,
with no stemming, so "worsening" and "worsened" are distinct entities.
"""
from __future__ import annotations

import hashlib
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

DEFAULT_EPS = 1e-10

DEFAULT_KEYWORDS = (
    "worsened",
    "worsening",
    "improved",
    "improving",
    "increased",
    "increasing",
    "decreased",
    "decreasing",
    "new",
    "resolved",
    "stable",
    "unchanged",
    "enlarged",
    "enlarging",
    "persistent",
    "progressed",
    "progression",
    "interval",
)

_TOKEN = re.compile(r"[a-z0-9]+")


def tokenize(text: str) -> list[str]:
    return _TOKEN.findall(text.lower())


@dataclass(frozen=True)
class TemporalKeywordList:
    keywords: tuple[str, ...]
    source: str = "builtin"

    def __post_init__(self):
        if not self.keywords:
            raise ValueError("keyword list is empty")
        seen = set()
        for kw in self.keywords:
            if not kw or kw != kw.lower() or kw != kw.strip():
                raise ValueError(f"keyword {kw!r} must be non-empty, lowercase and trimmed")
            if not tokenize(kw):
                raise ValueError(f"keyword {kw!r} has no alphanumeric tokens")
            if kw in seen:
                raise ValueError(f"duplicate keyword {kw!r}")
            seen.add(kw)

    @classmethod
    def default(cls) -> "TemporalKeywordList":
        return cls(DEFAULT_KEYWORDS, "builtin")

    @classmethod
    def from_file(cls, path) -> "TemporalKeywordList":
        """One keyword per line; ``#`` comments and blank lines are ignored."""
        words = []
        for line in Path(path).read_text(encoding="utf-8").splitlines():
            line = line.split("#", 1)[0].strip()
            if line:
                words.append(line)
        return cls(tuple(words), "file")

    @classmethod
    def load(cls, spec: str) -> "TemporalKeywordList":
        return cls.default() if spec == "default" else cls.from_file(spec)

    def digest(self) -> str:
        return hashlib.sha256("\n".join(self.keywords).encode("utf-8")).hexdigest()

    def __iter__(self):
        return iter(self.keywords)

    def __len__(self):
        return len(self.keywords)


def extract_entities(text: str, keywords: TemporalKeywordList | Iterable[str] | None = None) -> frozenset[str]:
    """Unique keywords whose token sequence occurs in ``text``."""
    if keywords is None:
        keywords = TemporalKeywordList.default()
    tokens = tokenize(text)
    found = set()
    for kw in keywords:
        parts = tokenize(kw)
        k = len(parts)
        if any(tokens[i:i + k] == parts for i in range(len(tokens) - k + 1)):
            found.add(kw)
    return frozenset(found)


@dataclass(frozen=True)
class TemporalScore:
    precision: float
    recall: float
    f1: float
    n_gt: int
    n_gr: int
    n_common: int


def temporal_f1(gt: Iterable[str], gr: Iterable[str], beta: float = 1.0, eps: float = DEFAULT_EPS) -> TemporalScore:
    """Epsilon-smoothed F-beta between ground-truth and generated entity sets.

    With both sets empty every component is 1.
    """
    if beta <= 0 or eps <= 0:
        raise ValueError("beta and eps must be positive")
    gt, gr = set(gt), set(gr)
    common = len(gt & gr)
    p = (common + eps) / (len(gr) + eps)
    r = (common + eps) / (len(gt) + eps)
    b2 = beta * beta
    f1 = (1.0 + b2) * p * r / (b2 * p + r)
    return TemporalScore(p, r, f1, len(gt), len(gr), common)


@dataclass
class CorpusScore:
    precision: float
    recall: float
    f1: float
    pairs: list[TemporalScore] = field(default_factory=list)


def corpus_f1(
    pairs: Sequence[tuple[str, str]],
    keywords: TemporalKeywordList | None = None,
    beta: float = 1.0,
    eps: float = DEFAULT_EPS,
) -> CorpusScore:
    """Unweighted mean of per-report scores over ``(ground truth, generated)`` pairs."""
    if not pairs:
        raise ValueError("corpus is empty")
    kw = keywords or TemporalKeywordList.default()
    scores = [
        temporal_f1(extract_entities(gt, kw), extract_entities(gr, kw), beta, eps)
        for gt, gr in pairs
    ]
    n = len(scores)
    return CorpusScore(
        precision=sum(s.precision for s in scores) / n,
        recall=sum(s.recall for s in scores) / n,
        f1=sum(s.f1 for s in scores) / n,
        pairs=scores,
    )


def read_pairs_tsv(path) -> list[tuple[str, str]]:
    """``ground truth<TAB>generated`` per line; blank lines skipped."""
    out = []
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip():
            continue
        cols = line.split("\t")
        if len(cols) != 2:
            raise ValueError(f"line {lineno}: expected 2 tab-separated columns, got {len(cols)}")
        out.append((cols[0], cols[1]))
    return out
