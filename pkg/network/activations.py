"""Neuron activation functions and their derivatives."""

from enum import Enum
from typing import Sequence

import numpy as np


class Activation(str, Enum):
    """Activation tag; the value is the name used in configs and model dumps."""

    TANH = "tanh"
    RELU = "relu"
    SIGMOID = "sigmoid"
    IDENTITY = "identity"

    def apply(self, z: np.ndarray) -> np.ndarray:
        if self is Activation.TANH:
            return np.tanh(z)
        if self is Activation.RELU:
            return np.maximum(z, 0.0)
        if self is Activation.SIGMOID:
            # split form avoids overflow in exp for large |z|
            out = np.empty_like(z, dtype=np.float64)
            pos = z >= 0
            out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
            ez = np.exp(z[~pos])
            out[~pos] = ez / (1.0 + ez)
            return out
        return np.array(z, dtype=np.float64, copy=True)

    def derivative(self, z: np.ndarray, a: np.ndarray) -> np.ndarray:
        """d activation / dz, given the pre-activation z and its output a."""
        if self is Activation.TANH:
            return 1.0 - a * a
        if self is Activation.RELU:
            return (z > 0).astype(np.float64)
        if self is Activation.SIGMOID:
            return a * (1.0 - a)
        return np.ones_like(z, dtype=np.float64)

    @classmethod
    def parse(cls, name: str) -> "Activation":
        try:
            return cls(name.strip().lower())
        except ValueError:
            raise ValueError(f"Unknown activation '{name}'") from None


DEFAULT_POOL = (Activation.TANH, Activation.RELU, Activation.SIGMOID)


def apply_columns(z: np.ndarray, activations: Sequence[Activation]) -> np.ndarray:
    """Apply a per-neuron activation to each column of a pre-activation matrix."""
    kinds = set(activations)
    if len(kinds) == 1:
        return activations[0].apply(z)
    out = np.empty_like(z, dtype=np.float64)
    tags = np.array([act.value for act in activations])
    for act in kinds:
        cols = tags == act.value
        out[:, cols] = act.apply(z[:, cols])
    return out


def derivative_columns(z: np.ndarray, a: np.ndarray, activations: Sequence[Activation]) -> np.ndarray:
    """Column-wise counterpart of ``apply_columns`` for the derivative."""
    kinds = set(activations)
    if len(kinds) == 1:
        return activations[0].derivative(z, a)
    out = np.empty_like(z, dtype=np.float64)
    tags = np.array([act.value for act in activations])
    for act in kinds:
        cols = tags == act.value
        out[:, cols] = act.derivative(z[:, cols], a[:, cols])
    return out
