"""Regression error metrics."""

import numpy as np

from core.exceptions import ShapeError

# One output per fitness case, in target units.
Semantics = np.ndarray


def mse(pred: Semantics, targets: np.ndarray) -> float:
    """Mean squared error between predictions and targets."""
    pred = np.asarray(pred, dtype=np.float64).reshape(-1)
    targets = np.asarray(targets, dtype=np.float64).reshape(-1)
    if pred.shape != targets.shape:
        raise ShapeError(f"prediction length {pred.shape[0]} != target length {targets.shape[0]}")
    if pred.size == 0:
        raise ShapeError("error of empty vectors is undefined")
    diff = pred - targets
    return float(np.mean(diff * diff))


def rmse(pred: Semantics, targets: np.ndarray) -> float:
    """Root mean squared error between predictions and targets."""
    return float(np.sqrt(mse(pred, targets)))
