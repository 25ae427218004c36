"""Inflate and deflate mutations on composite individuals.

Inflate appends a freshly sampled perturbation block; deflate removes one.
Both return new individuals and leave the parent untouched.
"""

import math
from typing import Optional, Sequence

import numpy as np

from core.exceptions import (
    BlockIndexError,
    CacheCoherenceError,
    ConfigurationError,
    DeflateUnavailableError,
    ShapeError,
)
from evolution.blocks import ChainNeuron, ChainUnit, PerturbationBlock
from evolution.individual import CompositeIndividual
from network.activations import DEFAULT_POOL, Activation
from network.dataset import Dataset

CHAIN_WEIGHT_RANGE = (-1.0, 1.0)


def validate_mutation_step(ms: float) -> float:
    if not (np.isfinite(ms) and ms > 0):
        raise ConfigurationError(f"mutation step must be a positive real, got {ms}")
    return float(ms)


def validate_span_fraction(span_fraction: float) -> float:
    if not (0.0 < span_fraction <= 1.0):
        raise ConfigurationError(f"span fraction must be in (0, 1], got {span_fraction}")
    return float(span_fraction)


def chain_length(layer_count: int, span_fraction: float) -> int:
    """Number of chain neurons for a base of ``layer_count`` layers (hidden + output)."""
    # tolerance keeps e.g. 0.7 * 10 from rounding up to 8
    return max(1, min(layer_count, math.ceil(span_fraction * layer_count - 1e-9)))


def build_perturbation(
    parent: CompositeIndividual,
    data_train: Dataset,
    data_test: Dataset,
    ms: float,
    span_fraction: float,
    rng: np.random.Generator,
    activation_pool: Sequence[Activation] = DEFAULT_POOL,
) -> PerturbationBlock:
    """Sample a perturbation chain for ``parent`` and cache its semantics.

    The chain spans the first ``ceil(span_fraction * n)`` layers of the
    parent's base (n = hidden layers + 1). Internal weights and biases are
    uniform in [-1, 1]; the output weight is uniform in [0, ms].
    """
    ms = validate_mutation_step(ms)
    span_fraction = validate_span_fraction(span_fraction)
    for split, data, cached in (
        ("train", data_train, parent.sum_train_semantics),
        ("test", data_test, parent.sum_test_semantics),
    ):
        if data.feature_count != parent.base.input_dim:
            raise ShapeError(
                f"{split} data has {data.feature_count} features, base expects {parent.base.input_dim}"
            )
        if data.row_count != cached.shape[0]:
            raise CacheCoherenceError(
                f"{split} data has {data.row_count} rows, parent caches {cached.shape[0]}"
            )

    pool = tuple(activation_pool) or (Activation.TANH,)
    low, high = CHAIN_WEIGHT_RANGE
    span = chain_length(parent.base.depth + 1, span_fraction)
    neurons = []
    for j in range(span):
        width = parent.train_activations[j].shape[1]
        input_weights = rng.uniform(low, high, size=width)
        chain_weight = rng.uniform(low, high) if j > 0 else None
        bias = rng.uniform(low, high)
        if j == span - 1:
            activation = Activation.TANH
        else:
            activation = pool[int(rng.integers(0, len(pool)))]
        neurons.append(ChainNeuron(input_weights, chain_weight, bias, activation))
    unit = ChainUnit(tuple(neurons), rng.uniform(0.0, ms))
    return PerturbationBlock.from_unit(unit, parent.train_activations, parent.test_activations)


def inflate(
    parent: CompositeIndividual,
    block: PerturbationBlock,
    lineage_id: Optional[str] = None,
) -> CompositeIndividual:
    """Offspring = parent + block (appended to the block history)."""
    if block.cached_train_semantics.shape != parent.sum_train_semantics.shape:
        raise CacheCoherenceError(
            f"block train semantics has {block.cached_train_semantics.shape[0]} entries, "
            f"parent has {parent.sum_train_semantics.shape[0]}"
        )
    if block.cached_test_semantics.shape != parent.sum_test_semantics.shape:
        raise CacheCoherenceError(
            f"block test semantics has {block.cached_test_semantics.shape[0]} entries, "
            f"parent has {parent.sum_test_semantics.shape[0]}"
        )
    block.unit.check_attachment(parent.train_activations)
    return parent.derive(
        parent.blocks + (block,),
        parent.sum_train_semantics + block.cached_train_semantics,
        parent.sum_test_semantics + block.cached_test_semantics,
        lineage_id=lineage_id,
    )


def deflate(
    parent: CompositeIndividual,
    index: int,
    lineage_id: Optional[str] = None,
) -> CompositeIndividual:
    """Offspring = parent with block ``index`` removed.

    Raises:
        DeflateUnavailableError: the parent has no blocks
        BlockIndexError: index outside [0, k)
    """
    k = len(parent.blocks)
    if k == 0:
        raise DeflateUnavailableError("deflate needs at least one perturbation block")
    if not 0 <= index < k:
        raise BlockIndexError(f"block index {index} outside [0, {k})")
    removed = parent.blocks[index]
    return parent.derive(
        parent.blocks[:index] + parent.blocks[index + 1:],
        parent.sum_train_semantics - removed.cached_train_semantics,
        parent.sum_test_semantics - removed.cached_test_semantics,
        lineage_id=lineage_id,
    )
