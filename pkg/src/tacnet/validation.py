"""Input checks shared by the estimators and the CLI."""
from __future__ import annotations

import numpy as np

from .config import TacConfig
from .errors import DimensionError
from .harness.synthetic import LABELS
from .tac import check_stack


def check_pairs(X, config: TacConfig):
    """Split ``X`` into ``(curr, prior)``.

    ``X`` is either ``(n, 2, L, N, D)`` with current at index 0 and prior at
    index 1, or ``(n, L, N, D)`` meaning no prior (``prior`` is returned as None).
    """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 5:
        if X.shape[1] != 2:
            raise DimensionError(f"pair axis must have extent 2, got {X.shape[1]}")
        return check_stack(X[:, 0], config, "current stack"), check_stack(X[:, 1], config, "prior stack")
    if X.ndim == 4:
        return check_stack(X, config, "current stack"), None
    raise DimensionError(f"expected (n, 2, L, N, D) or (n, L, N, D), got shape {X.shape}")


def check_labels(y, n: int) -> np.ndarray:
    """Map direction names or class indices to ``0..2``."""
    y = np.asarray(y)
    if y.shape != (n,):
        raise DimensionError(f"expected {n} labels, got shape {y.shape}")
    if y.dtype.kind in "USO":
        lookup = {name: i for i, name in enumerate(LABELS)}
        try:
            return np.array([lookup[str(v)] for v in y], dtype=np.int64)
        except KeyError as e:
            raise ValueError(f"unknown direction label {e.args[0]!r}; expected one of {LABELS}") from None
    if not np.all(np.isin(y, (0, 1, 2))):
        raise ValueError("integer labels must be 0 (improved), 1 (stable) or 2 (worsened)")
    return y.astype(np.int64)
