"""Supervised regression datasets and input standardization."""

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from core.exceptions import ShapeError


@dataclass(frozen=True, eq=False)
class Dataset:
    """An n x d input matrix with a target vector of n fitness cases.

    Arrays are stored as read-only float64 copies so a Dataset can be shared
    between workers without defensive copying.
    """

    inputs: np.ndarray
    targets: np.ndarray
    name: str = field(default="", compare=False)

    def __post_init__(self):
        inputs = np.array(self.inputs, dtype=np.float64)
        targets = np.array(self.targets, dtype=np.float64).reshape(-1)
        if inputs.ndim == 1:
            inputs = inputs.reshape(-1, 1)
        if inputs.ndim != 2:
            raise ShapeError(f"inputs must be a 2-D matrix, got {inputs.ndim}-D")
        if inputs.shape[0] != targets.shape[0]:
            raise ShapeError(
                f"inputs have {inputs.shape[0]} rows but targets have {targets.shape[0]}"
            )
        if inputs.shape[0] < 2:
            raise ShapeError(f"a dataset needs at least 2 rows, got {inputs.shape[0]}")
        if inputs.shape[1] < 1:
            raise ShapeError("a dataset needs at least 1 feature")
        if not np.all(np.isfinite(inputs)) or not np.all(np.isfinite(targets)):
            raise ShapeError("dataset contains missing or non-finite values")
        inputs.setflags(write=False)
        targets.setflags(write=False)
        object.__setattr__(self, "inputs", inputs)
        object.__setattr__(self, "targets", targets)

    @property
    def row_count(self) -> int:
        return self.inputs.shape[0]

    @property
    def feature_count(self) -> int:
        return self.inputs.shape[1]

    def subset(self, indices: Sequence[int], name: Optional[str] = None) -> "Dataset":
        idx = np.asarray(indices, dtype=np.int64)
        return Dataset(self.inputs[idx], self.targets[idx], name=name or self.name)


@dataclass(frozen=True, eq=False)
class Standardizer:
    """Per-feature z-score transform fitted on one split."""

    mean: np.ndarray
    scale: np.ndarray

    @classmethod
    def fit(cls, data: Dataset) -> "Standardizer":
        mean = data.inputs.mean(axis=0)
        scale = data.inputs.std(axis=0)
        # constant columns are centred but left unscaled
        scale = np.where(scale > 0.0, scale, 1.0)
        return cls(mean=mean, scale=scale)

    def transform(self, data: Dataset) -> Dataset:
        if data.feature_count != self.mean.shape[0]:
            raise ShapeError(
                f"standardizer fitted on {self.mean.shape[0]} features, data has {data.feature_count}"
            )
        return Dataset((data.inputs - self.mean) / self.scale, data.targets, name=data.name)
