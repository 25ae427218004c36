"""Dense feedforward network math for nevo_gspt."""

from .activations import Activation, DEFAULT_POOL
from .dataset import Dataset, Standardizer
from .metrics import Semantics, rmse
from .mlp import (
    ArchitectureConfig,
    DenseLayer,
    ForwardTrace,
    MlpNetwork,
    OptimizerConfig,
    build_mlp,
    forward,
    gradient,
    random_mlp,
    train_backprop,
)

__all__ = [
    'Activation', 'DEFAULT_POOL', 'Dataset', 'Standardizer', 'Semantics', 'rmse',
    'ArchitectureConfig', 'DenseLayer', 'ForwardTrace', 'MlpNetwork', 'OptimizerConfig',
    'build_mlp', 'forward', 'gradient', 'random_mlp', 'train_backprop',
]
