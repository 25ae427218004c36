"""Synthetic data and small configurations shared by the tests."""

from pathlib import Path

import numpy as np

from evolution.config import AprtMode, EvolutionConfig
from network.activations import Activation
from network.dataset import Dataset
from network.mlp import ArchitectureConfig, OptimizerConfig

SMOOTH_POOL = (Activation.TANH, Activation.SIGMOID)
SMALL_ARCH = ArchitectureConfig(depth_range=(1, 2), width_range=(2, 5))


def make_regression(rows: int, features: int, seed: int = 0, noise: float = 0.1) -> Dataset:
    rng = np.random.default_rng(seed)
    inputs = rng.normal(size=(rows, features))
    weights = rng.normal(size=features)
    targets = np.sin(inputs @ weights) + noise * rng.normal(size=rows)
    return Dataset(inputs, targets, name=f"synthetic-{rows}x{features}")


def small_config(**overrides) -> EvolutionConfig:
    cfg = EvolutionConfig(
        population_size=10,
        generations=5,
        aprt_mode=AprtMode.NONE,
        aprt_opt=OptimizerConfig(learning_rate=0.01, epochs=5),
        apot_opt=OptimizerConfig(learning_rate=1e-4, epochs=5),
        architecture=SMALL_ARCH,
    )
    return cfg.with_overrides(**overrides)


def write_csv(path: Path, data: Dataset, header: bool = True) -> Path:
    lines = []
    if header:
        lines.append(','.join([f"x{i}" for i in range(data.feature_count)] + ['y']))
    for row, target in zip(data.inputs, data.targets):
        lines.append(','.join(repr(float(v)) for v in list(row) + [target]))
    path.write_text('\n'.join(lines) + '\n')
    return path
