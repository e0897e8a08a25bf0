"""Connector configuration and the flat ``key=value`` config format."""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping

from .errors import ConfigurationError


def parse_kv_text(text: str) -> dict[str, str]:
    """Parse ``key=value`` lines; ``#`` starts a comment, blank lines are skipped."""
    out: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if not sep or not key:
            raise ConfigurationError(f"line {lineno}: expected key=value, got {raw!r}")
        if key in out:
            raise ConfigurationError(f"line {lineno}: duplicate key {key!r}")
        out[key] = value
    return out


def read_kv_file(path) -> dict[str, str]:
    return parse_kv_text(Path(path).read_text(encoding="utf-8"))


def smallest_prime_factor(n: int) -> int:
    p = 2
    while p * p <= n:
        if n % p == 0:
            return p
        p += 1
    return n


def factor_chain(layers: int) -> list[int]:
    """Channel counts visited by the layer compressor, e.g. 12 -> [12, 6, 3, 1]."""
    if layers < 1:
        raise ConfigurationError(f"layer count must be >= 1, got {layers}")
    chain = [layers]
    while chain[-1] > 1:
        c = chain[-1]
        chain.append(c // smallest_prime_factor(c))
    return chain


def se_hidden_width(channels: int, reduction: int) -> int:
    """Bottleneck width of the squeeze-excitation block for ``channels`` inputs.

    The nominal ratio drops to 2 below four channels and is then lowered to
    the largest divisor of ``channels`` so the width stays integral.
    """
    if reduction < 1:
        raise ConfigurationError(f"SE reduction must be >= 1, got {reduction}")
    nominal = reduction if channels >= 4 else min(reduction, 2)
    r = max(k for k in range(1, nominal + 1) if channels % k == 0)
    return channels // r


@dataclass(frozen=True)
class TacConfig:
    layers: int = 12
    grid: int = 37
    enc_dim: int = 768
    llm_dim: int = 4096
    se_reduction: int = 4
    heads: int = 8
    depth: int = 2
    seed: int = 0

    def __post_init__(self):
        self.validate()

    @property
    def n_tokens(self) -> int:
        return self.grid * self.grid

    @property
    def chain(self) -> list[int]:
        return factor_chain(self.layers)

    def validate(self) -> None:
        for f in dataclasses.fields(self):
            v = getattr(self, f.name)
            if not isinstance(v, int) or isinstance(v, bool):
                raise ConfigurationError(f"{f.name} must be an integer, got {v!r}")
        for name in ("layers", "grid", "enc_dim", "llm_dim", "se_reduction", "heads", "depth"):
            if getattr(self, name) < 1:
                raise ConfigurationError(f"{name} must be >= 1, got {getattr(self, name)}")
        if self.seed < 0:
            raise ConfigurationError(f"seed must be unsigned, got {self.seed}")
        if self.enc_dim % self.heads:
            raise ConfigurationError(
                f"heads={self.heads} does not divide enc_dim={self.enc_dim}"
            )

    def replace(self, **changes) -> "TacConfig":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict[str, int]:
        return dataclasses.asdict(self)

    def to_text(self) -> str:
        return "".join(f"{k}={v}\n" for k, v in self.to_dict().items())

    @classmethod
    def keys(cls) -> list[str]:
        return [f.name for f in dataclasses.fields(cls)]

    @classmethod
    def from_mapping(cls, mapping: Mapping[str, object], **overrides) -> "TacConfig":
        """Build from a mapping, ignoring keys that are not config fields."""
        kwargs = {}
        for k in cls.keys():
            if k in mapping:
                try:
                    kwargs[k] = int(mapping[k])
                except (TypeError, ValueError):
                    raise ConfigurationError(f"{k} must be an integer, got {mapping[k]!r}") from None
        kwargs.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**kwargs)

    @classmethod
    def from_text(cls, text: str) -> "TacConfig":
        mapping = parse_kv_text(text)
        unknown = set(mapping) - set(cls.keys())
        if unknown:
            raise ConfigurationError(f"unknown config keys: {sorted(unknown)}")
        return cls.from_mapping(mapping)


TOY_GRADCHECK = TacConfig(layers=12, grid=3, enc_dim=8, llm_dim=16, heads=2, depth=1, seed=7)
TOY_SWAP = TacConfig(layers=12, grid=4, enc_dim=32, llm_dim=64, heads=4, depth=2, seed=0)
