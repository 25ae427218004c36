"""Composite individuals: a base network plus its history of perturbation blocks.

Fitness is incremental. An individual caches the semantics of its base
network and the running sum ``base + sum(block semantics)`` on both splits, so
offspring fitness needs only the new block's semantics (inflate) or a vector
subtraction (deflate), never a forward pass through the whole model.
"""

import uuid
from dataclasses import dataclass
from typing import NamedTuple, Optional, Sequence, Tuple

import numpy as np

from core.exceptions import CacheCoherenceError, ShapeError
from evolution.blocks import ChainUnit, PerturbationBlock
from network.dataset import Dataset
from network.metrics import Semantics, rmse
from network.mlp import MlpNetwork

# Sums are rebuilt from the block caches after this many incremental updates,
# bounding floating-point drift from repeated add/subtract.
RESYNC_INTERVAL = 100


class Fitness(NamedTuple):
    train_rmse: float
    test_rmse: float


def _new_lineage_id() -> str:
    return uuid.uuid4().hex[:12]


def _frozen(values: np.ndarray) -> np.ndarray:
    values = np.ascontiguousarray(values, dtype=np.float64)
    values.setflags(write=False)
    return values


@dataclass(frozen=True, eq=False)
class CompositeIndividual:
    base: MlpNetwork
    blocks: Tuple[PerturbationBlock, ...]
    base_train_semantics: Semantics
    base_test_semantics: Semantics
    sum_train_semantics: Semantics
    sum_test_semantics: Semantics
    train_rmse: float
    test_rmse: float
    node_count: int
    lineage_id: str
    # shared, read-only views used to evaluate new blocks
    train_targets: np.ndarray
    test_targets: np.ndarray
    train_activations: Tuple[np.ndarray, ...]
    test_activations: Tuple[np.ndarray, ...]
    updates_since_resync: int = 0

    @property
    def block_count(self) -> int:
        return len(self.blocks)

    @property
    def parameter_count(self) -> int:
        return self.base.parameter_count + sum(block.parameter_count for block in self.blocks)

    def derive(
        self,
        blocks: Tuple[PerturbationBlock, ...],
        sum_train: np.ndarray,
        sum_test: np.ndarray,
        lineage_id: Optional[str] = None,
    ) -> "CompositeIndividual":
        """Offspring sharing this individual's base and caches."""
        updates = self.updates_since_resync + 1
        if updates >= RESYNC_INTERVAL:
            sum_train = _resum(self.base_train_semantics, (b.cached_train_semantics for b in blocks))
            sum_test = _resum(self.base_test_semantics, (b.cached_test_semantics for b in blocks))
            updates = 0
        return CompositeIndividual(
            base=self.base,
            blocks=blocks,
            base_train_semantics=self.base_train_semantics,
            base_test_semantics=self.base_test_semantics,
            sum_train_semantics=_frozen(sum_train),
            sum_test_semantics=_frozen(sum_test),
            train_rmse=rmse(sum_train, self.train_targets),
            test_rmse=rmse(sum_test, self.test_targets),
            node_count=self.base.node_count + sum(block.depth_span for block in blocks),
            lineage_id=lineage_id or _new_lineage_id(),
            train_targets=self.train_targets,
            test_targets=self.test_targets,
            train_activations=self.train_activations,
            test_activations=self.test_activations,
            updates_since_resync=updates,
        )


def _resum(base: np.ndarray, block_semantics) -> np.ndarray:
    total = np.array(base, dtype=np.float64, copy=True)
    for values in block_semantics:
        total += values
    return total


def from_base(
    net: MlpNetwork,
    train: Dataset,
    test: Dataset,
    lineage_id: Optional[str] = None,
) -> CompositeIndividual:
    """Wrap a plain network as an individual with an empty block list."""
    if train.feature_count != net.input_dim or test.feature_count != net.input_dim:
        raise ShapeError(
            f"network expects {net.input_dim} features, got train={train.feature_count} "
            f"test={test.feature_count}"
        )
    train_trace = net.trace(train.inputs)
    test_trace = net.trace(test.inputs)
    train_sem = _frozen(train_trace.output)
    test_sem = _frozen(test_trace.output)
    return CompositeIndividual(
        base=net,
        blocks=(),
        base_train_semantics=train_sem,
        base_test_semantics=test_sem,
        sum_train_semantics=train_sem,
        sum_test_semantics=test_sem,
        train_rmse=rmse(train_sem, train.targets),
        test_rmse=rmse(test_sem, test.targets),
        node_count=net.node_count,
        lineage_id=lineage_id or _new_lineage_id(),
        train_targets=train.targets,
        test_targets=test.targets,
        # the output layer's activations are the base semantics; chains never read them
        train_activations=tuple(_frozen(a) for a in train_trace.post[:-1]),
        test_activations=tuple(_frozen(a) for a in test_trace.post[:-1]),
    )


def evaluate_incremental(ind: CompositeIndividual) -> Fitness:
    """Fitness from the cached semantic sums alone (no forward passes)."""
    if ind.sum_train_semantics.shape != ind.train_targets.shape:
        raise CacheCoherenceError(
            f"train cache has {ind.sum_train_semantics.shape[0]} entries, "
            f"targets have {ind.train_targets.shape[0]}"
        )
    if ind.sum_test_semantics.shape != ind.test_targets.shape:
        raise CacheCoherenceError(
            f"test cache has {ind.sum_test_semantics.shape[0]} entries, "
            f"targets have {ind.test_targets.shape[0]}"
        )
    return Fitness(
        rmse(ind.sum_train_semantics, ind.train_targets),
        rmse(ind.sum_test_semantics, ind.test_targets),
    )


def size(ind: CompositeIndividual) -> int:
    return ind.node_count


class MaterializedNetwork:
    """A composite individual as one evaluable, trainable network.

    Output per row: ``base(x) + sum_j output_weight_j * chain_j(x)``.
    Parameters: the base network's (canonical order), then each chain's.
    """

    def __init__(self, base: MlpNetwork, units: Sequence[ChainUnit]):
        self.base = base
        self.units: Tuple[ChainUnit, ...] = tuple(units)
        self.input_dim = base.input_dim

    @property
    def node_count(self) -> int:
        return self.base.node_count + sum(unit.depth_span for unit in self.units)

    @property
    def parameter_count(self) -> int:
        return self.base.parameter_count + sum(unit.parameter_count for unit in self.units)

    def _check(self, data: Dataset) -> None:
        if data.feature_count != self.input_dim:
            raise ShapeError(f"model expects {self.input_dim} features, dataset has {data.feature_count}")

    def predict(self, inputs: np.ndarray) -> Semantics:
        trace = self.base.trace(inputs)
        activations = trace.post[:-1]
        out = np.array(trace.output, dtype=np.float64, copy=True)
        for unit in self.units:
            out += unit.semantics(activations)
        return out

    def forward(self, data: Dataset) -> Semantics:
        self._check(data)
        return self.predict(data.inputs)

    def parameter_vector(self) -> np.ndarray:
        return np.concatenate([self.base.parameter_vector()] + [u.parameter_vector() for u in self.units])

    def with_parameters(self, vector: np.ndarray) -> "MaterializedNetwork":
        vector = np.asarray(vector, dtype=np.float64)
        if vector.shape != (self.parameter_count,):
            raise ShapeError(f"expected {self.parameter_count} parameters, got {vector.shape}")
        offset = self.base.parameter_count
        base = self.base.with_parameters(vector[:offset])
        units = []
        for unit in self.units:
            count = unit.parameter_count
            units.append(unit.with_parameters(vector[offset:offset + count]))
            offset += count
        return MaterializedNetwork(base, units)

    def loss_and_gradient(self, data: Dataset) -> Tuple[float, np.ndarray]:
        self._check(data)
        trace = self.base.trace(data.inputs)
        activations = trace.post[:-1]
        pred = np.array(trace.output, dtype=np.float64, copy=True)
        for unit in self.units:
            pred += unit.semantics(activations)
        residual = pred - data.targets
        loss = float(np.mean(residual * residual))
        output_grad = 2.0 * residual / data.row_count

        unit_grads = []
        extra = {}
        for unit in self.units:
            grad, unit_extra = unit.backward(activations, output_grad)
            unit_grads.append(grad)
            for layer, values in unit_extra.items():
                extra[layer] = extra[layer] + values if layer in extra else values
        base_grad = self.base.backward(trace, output_grad, extra)
        return loss, np.concatenate([base_grad] + unit_grads)


def materialize(ind: CompositeIndividual) -> MaterializedNetwork:
    return MaterializedNetwork(ind.base, [block.unit for block in ind.blocks])


def rebuild(
    model: MaterializedNetwork,
    train: Dataset,
    test: Dataset,
    lineage_id: Optional[str] = None,
) -> CompositeIndividual:
    """Composite individual with caches recomputed from a (tuned) materialized model."""
    seed = from_base(model.base, train, test, lineage_id=lineage_id)
    blocks = tuple(
        PerturbationBlock.from_unit(unit, seed.train_activations, seed.test_activations)
        for unit in model.units
    )
    if not blocks:
        return seed
    sum_train = _resum(seed.base_train_semantics, (b.cached_train_semantics for b in blocks))
    sum_test = _resum(seed.base_test_semantics, (b.cached_test_semantics for b in blocks))
    return CompositeIndividual(
        base=seed.base,
        blocks=blocks,
        base_train_semantics=seed.base_train_semantics,
        base_test_semantics=seed.base_test_semantics,
        sum_train_semantics=_frozen(sum_train),
        sum_test_semantics=_frozen(sum_test),
        train_rmse=rmse(sum_train, train.targets),
        test_rmse=rmse(sum_test, test.targets),
        node_count=model.node_count,
        lineage_id=seed.lineage_id,
        train_targets=seed.train_targets,
        test_targets=seed.test_targets,
        train_activations=seed.train_activations,
        test_activations=seed.test_activations,
    )
