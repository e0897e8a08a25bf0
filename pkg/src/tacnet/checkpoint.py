"""Bit-exact little-endian tensor container.

Layout::

    b"TAC1"                     magic
    u32 version                 currently 1
    u32 len, bytes              UTF-8 config block (key=value lines, may be empty)
    u32 count                   number of tensor records
    per record:
        u32 len, bytes          UTF-8 tensor name
        u32 rank
        u64 * rank              extents
        f64 * prod(extents)     row-major data

Checkpoints carry a full :class:`~tacnet.config.TacConfig` block; standalone
tensor files (inputs for ``forward``, synthetic pairs, probe weights) use the
same container with an empty config block.
"""
from __future__ import annotations

import struct
from pathlib import Path
from typing import Mapping

import numpy as np

from .config import TacConfig
from .errors import CheckpointError, ConfigMismatchError, ConfigurationError
from .nn.params import ParamStore
from .tac import param_shapes

MAGIC = b"TAC1"
VERSION = 1


def _pack_str(s: str) -> bytes:
    b = s.encode("utf-8")
    return struct.pack("<I", len(b)) + b


def encode(tensors: Mapping[str, np.ndarray], config_text: str = "") -> bytes:
    parts = [MAGIC, struct.pack("<I", VERSION), _pack_str(config_text), struct.pack("<I", len(tensors))]
    for name, arr in tensors.items():
        arr = np.asarray(arr, dtype="<f8", order="C")
        parts.append(_pack_str(name))
        parts.append(struct.pack("<I", arr.ndim))
        parts.append(struct.pack(f"<{arr.ndim}Q", *arr.shape))
        parts.append(arr.tobytes())
    return b"".join(parts)


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, n: int, what: str) -> bytes:
        if self.pos + n > len(self.data):
            raise CheckpointError(
                f"truncated file: needed {n} bytes for {what} at offset {self.pos}, "
                f"only {len(self.data) - self.pos} left"
            )
        out = self.data[self.pos:self.pos + n]
        self.pos += n
        return out

    def u32(self, what: str) -> int:
        return struct.unpack("<I", self.take(4, what))[0]

    def string(self, what: str) -> str:
        n = self.u32(what + " length")
        try:
            return self.take(n, what).decode("utf-8")
        except UnicodeDecodeError as e:
            raise CheckpointError(f"{what} is not valid UTF-8") from e


def decode(data: bytes) -> tuple[str, dict[str, np.ndarray]]:
    """Parse a container; returns ``(config_text, tensors)``."""
    r = _Reader(data)
    magic = r.take(4, "magic")
    if magic != MAGIC:
        raise CheckpointError(f"bad magic {magic!r}, expected {MAGIC!r}")
    version = r.u32("version")
    if version != VERSION:
        raise CheckpointError(f"unsupported version {version}, expected {VERSION}")
    config_text = r.string("config block")
    count = r.u32("tensor count")
    tensors: dict[str, np.ndarray] = {}
    for i in range(count):
        name = r.string(f"name of tensor {i}")
        if name in tensors:
            raise CheckpointError(f"duplicate tensor name {name!r}")
        rank = r.u32(f"rank of {name}")
        shape = struct.unpack(f"<{rank}Q", r.take(8 * rank, f"extents of {name}"))
        size = int(np.prod(shape, dtype=np.int64)) if rank else 1
        raw = r.take(8 * size, f"data of {name}")
        tensors[name] = np.frombuffer(raw, dtype="<f8").astype(np.float64).reshape(shape)
    if r.pos != len(data):
        raise CheckpointError(f"{len(data) - r.pos} trailing bytes after last tensor")
    return config_text, tensors


def write_tensors(path, tensors: Mapping[str, np.ndarray], config_text: str = "") -> None:
    Path(path).write_bytes(encode(tensors, config_text))


def read_tensors(path) -> dict[str, np.ndarray]:
    return decode(Path(path).read_bytes())[1]


def save_checkpoint(params: ParamStore, config: TacConfig, path) -> None:
    write_tensors(path, params.to_dict(), config.to_text())


def load_checkpoint(path, expected: TacConfig | None = None) -> tuple[ParamStore, TacConfig]:
    """Read a checkpoint, validating its config and parameter layout.

    If ``expected`` is given, a checkpoint written for any other config raises
    :class:`ConfigMismatchError`. Nothing is returned on failure.
    """
    config_text, tensors = decode(Path(path).read_bytes())
    if not config_text:
        raise CheckpointError("file has no config block; not a checkpoint")
    try:
        config = TacConfig.from_text(config_text)
    except ConfigurationError as e:
        raise CheckpointError(f"invalid config block: {e}") from e
    if expected is not None and expected != config:
        diffs = [
            f"{k}: file={v} expected={getattr(expected, k)}"
            for k, v in config.to_dict().items()
            if getattr(expected, k) != v
        ]
        raise ConfigMismatchError("checkpoint config mismatch: " + ", ".join(diffs))
    shapes = param_shapes(config)
    missing = [n for n in shapes if n not in tensors]
    extra = [n for n in tensors if n not in shapes]
    if missing or extra:
        raise CheckpointError(f"parameter name-set mismatch: missing={missing} unexpected={extra}")
    store = ParamStore()
    for name, shape in shapes.items():
        if tensors[name].shape != shape:
            raise CheckpointError(f"{name}: shape {tensors[name].shape}, config implies {shape}")
        store.add(name, tensors[name])
    return store, config
