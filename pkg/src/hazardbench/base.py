"""Shared model contract and errors."""

from __future__ import annotations

from typing import Protocol, runtime_checkable

import numpy as np

MODEL_FORMAT_VERSION = 1


class UnfittableError(ValueError):
    """The training data cannot support the requested model."""


class NumericalError(ArithmeticError):
    pass


class ConvergenceError(RuntimeError):
    def __init__(self, message, last_iterate=None, gradient_norm=None):
        super().__init__(message)
        self.last_iterate = last_iterate
        self.gradient_norm = gradient_norm


class DimensionMismatchError(ValueError):
    pass


@runtime_checkable
class RiskModel(Protocol):
    """What every fitted model provides: higher risk means earlier failure."""

    def predict_risk(self, X) -> np.ndarray: ...

    def to_json(self) -> dict: ...


def check_features(X, n_features: int) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[None, :]
    if X.ndim != 2 or X.shape[1] != n_features:
        raise DimensionMismatchError(
            f"expected {n_features} features, got array of shape {np.shape(X)}")
    return X


def require_events(event, minimum: int, what: str) -> None:
    n = int(np.sum(event))
    if n < minimum:
        raise UnfittableError(f"{what} needs at least {minimum} event(s), got {n}")
