"""Central-difference verification of analytic gradients."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Iterable

import numpy as np

from ..errors import NumericError
from .params import ParamStore


@dataclass
class GradCheckReport:
    per_param: dict[str, float] = field(default_factory=dict)
    worst: str = ""
    max_error: float = 0.0
    tol: float = 1e-4
    passed: bool = True

    def lines(self) -> list[str]:
        rows = [f"{name}\t{err:.3e}" for name, err in self.per_param.items()]
        verdict = "PASS" if self.passed else "FAIL"
        rows.append(f"{verdict}\tmax_rel_err={self.max_error:.3e}\tworst={self.worst}\ttol={self.tol:g}")
        return rows


def relative_error(analytic: np.ndarray, numeric: np.ndarray, floor: float = 1e-8) -> np.ndarray:
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), floor)
    return np.abs(analytic - numeric) / denom


def numerical_grad(loss_fn: Callable[[ParamStore], float], store: ParamStore, name: str, h: float = 1e-5) -> np.ndarray:
    """Central-difference gradient of ``loss_fn`` with respect to one parameter."""
    value = store.param(name).value
    flat = value.reshape(-1)
    out = np.empty(flat.shape)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + h
        f_plus = float(loss_fn(store))
        flat[i] = orig - h
        f_minus = float(loss_fn(store))
        flat[i] = orig
        if not (math.isfinite(f_plus) and math.isfinite(f_minus)):
            raise NumericError(f"non-finite loss while perturbing {name}[{i}]")
        out[i] = (f_plus - f_minus) / (2.0 * h)
    return out.reshape(value.shape)


def grad_check(
    loss_fn: Callable[[ParamStore], float],
    store: ParamStore,
    h: float = 1e-5,
    tol: float = 1e-4,
    names: Iterable[str] | None = None,
) -> GradCheckReport:
    """Compare the gradients currently held in ``store`` to central differences.

    ``loss_fn`` must be a pure forward pass; the analytic gradients are read
    from the store's grad slots, so run the backward pass before calling.
    """
    if h <= 0:
        raise ValueError("h must be positive")
    base = float(loss_fn(store))
    if not math.isfinite(base):
        raise NumericError("non-finite loss at the unperturbed parameters")
    report = GradCheckReport(tol=tol)
    analytic = store.grads()
    for name in names if names is not None else store.names():
        numeric = numerical_grad(loss_fn, store, name, h)
        err = float(relative_error(analytic[name], numeric).max()) if numeric.size else 0.0
        report.per_param[name] = err
        if err > report.max_error or not report.worst:
            report.max_error = err
            report.worst = name
    report.passed = report.max_error < tol
    return report
