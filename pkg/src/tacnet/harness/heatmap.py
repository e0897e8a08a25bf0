"""Token-weight heatmaps written as binary PGM images."""
from __future__ import annotations

from pathlib import Path

import numpy as np
from scipy.ndimage import gaussian_filter

from ..errors import DimensionError


def token_weights(features, grid: int) -> np.ndarray:
    """Mean absolute activation per token, laid out on the ``grid x grid`` patch grid."""
    features = np.asarray(features, dtype=np.float64)
    if features.ndim != 2:
        raise DimensionError(f"features must be (N, D), got shape {features.shape}")
    n = features.shape[0]
    if grid < 1 or n != grid * grid:
        raise DimensionError(f"{n} tokens do not form a {grid}x{grid} grid")
    return np.abs(features).mean(axis=1).reshape(grid, grid)


def heatmap_image(features, grid: int, upsample_factor: int = 14, sigma: float = 2.0) -> np.ndarray:
    """uint8 image of side ``grid * upsample_factor``.

    Nearest-neighbour upsampling, then a Gaussian blur truncated at 3 sigma,
    then min-max scaling to 0..255. A constant map scales to all zeros.
    """
    if upsample_factor < 1:
        raise ValueError("upsample_factor must be >= 1")
    w = token_weights(features, grid)
    img = np.repeat(np.repeat(w, upsample_factor, axis=0), upsample_factor, axis=1)
    if sigma > 0:
        img = gaussian_filter(img, sigma=sigma, mode="nearest", truncate=3.0)
    lo, hi = img.min(), img.max()
    if hi - lo <= 0:
        return np.zeros(img.shape, dtype=np.uint8)
    return np.rint((img - lo) / (hi - lo) * 255.0).astype(np.uint8)


def encode_pgm(img: np.ndarray) -> bytes:
    h, w = img.shape
    return f"P5\n{w} {h}\n255\n".encode("ascii") + np.ascontiguousarray(img, dtype=np.uint8).tobytes()


def decode_pgm(data: bytes) -> np.ndarray:
    parts = data.split(b"\n", 3)
    if len(parts) != 4 or parts[0] != b"P5":
        raise ValueError("not a binary PGM")
    w, h = map(int, parts[1].split())
    if int(parts[2]) != 255 or len(parts[3]) != w * h:
        raise ValueError("unexpected PGM body")
    return np.frombuffer(parts[3], dtype=np.uint8).reshape(h, w)


def emit_heatmap(features, grid: int, upsample_factor: int, sigma: float, path) -> np.ndarray:
    img = heatmap_image(features, grid, upsample_factor, sigma)
    Path(path).write_bytes(encode_pgm(img))
    return img
