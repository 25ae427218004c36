"""Perturbation chains appended to a base network by inflate mutations.

A chain has one neuron per attached base layer. Chain neuron ``j`` (0-based)
reads every activation of base layer ``j`` (layer 0 being the standardized
inputs) plus the output of chain neuron ``j - 1``. The last neuron is Tanh and
its output, scaled by ``output_weight``, is added to the base network's output.
Chains never read other chains and never feed back into the base network.
"""

from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from core.exceptions import ShapeError
from network.activations import Activation
from network.metrics import Semantics


@dataclass(frozen=True, eq=False)
class ChainNeuron:
    input_weights: np.ndarray  # one weight per activation of the attached base layer
    chain_weight: Optional[float]  # from the previous chain neuron; None for the first
    bias: float
    activation: Activation

    def __post_init__(self):
        weights = np.array(self.input_weights, dtype=np.float64).reshape(-1)
        weights.setflags(write=False)
        object.__setattr__(self, "input_weights", weights)
        object.__setattr__(self, "bias", float(self.bias))
        if self.chain_weight is not None:
            object.__setattr__(self, "chain_weight", float(self.chain_weight))

    @property
    def parameter_count(self) -> int:
        return self.input_weights.size + (0 if self.chain_weight is None else 1) + 1


@dataclass(frozen=True, eq=False)
class ChainUnit:
    """The evaluable part of a perturbation: chain neurons and output weight."""

    chain: Tuple[ChainNeuron, ...]
    output_weight: float

    def __post_init__(self):
        chain = tuple(self.chain)
        if not chain:
            raise ShapeError("a perturbation chain needs at least one neuron")
        if chain[0].chain_weight is not None:
            raise ShapeError("the first chain neuron has no incoming chain weight")
        if any(neuron.chain_weight is None for neuron in chain[1:]):
            raise ShapeError("every chain neuron after the first needs a chain weight")
        if chain[-1].activation is not Activation.TANH:
            raise ShapeError("the last chain neuron must be Tanh")
        object.__setattr__(self, "chain", chain)
        object.__setattr__(self, "output_weight", float(self.output_weight))

    @property
    def depth_span(self) -> int:
        return len(self.chain)

    @property
    def parameter_count(self) -> int:
        return sum(neuron.parameter_count for neuron in self.chain) + 1

    def check_attachment(self, base_activations: Sequence[np.ndarray]) -> None:
        if self.depth_span > len(base_activations):
            raise ShapeError(
                f"chain of {self.depth_span} neurons but the base exposes {len(base_activations)} layers"
            )
        for j, neuron in enumerate(self.chain):
            width = base_activations[j].shape[1]
            if neuron.input_weights.size != width:
                raise ShapeError(
                    f"chain neuron {j} has {neuron.input_weights.size} input weights, base layer has {width}"
                )

    def trace(self, base_activations: Sequence[np.ndarray]) -> Tuple[List[np.ndarray], List[np.ndarray]]:
        pre: List[np.ndarray] = []
        post: List[np.ndarray] = []
        previous = None
        for j, neuron in enumerate(self.chain):
            u = base_activations[j] @ neuron.input_weights + neuron.bias
            if previous is not None:
                u = u + neuron.chain_weight * previous
            previous = neuron.activation.apply(u)
            pre.append(u)
            post.append(previous)
        return pre, post

    def semantics(self, base_activations: Sequence[np.ndarray]) -> Semantics:
        """Per-row contribution ``output_weight * tanh(...)`` to the composite output."""
        _, post = self.trace(base_activations)
        return self.output_weight * post[-1]

    # ---- parameters: per neuron [input weights, chain weight?, bias], then output weight ----

    def parameter_vector(self) -> np.ndarray:
        parts = []
        for neuron in self.chain:
            parts.append(neuron.input_weights)
            if neuron.chain_weight is not None:
                parts.append(np.array([neuron.chain_weight]))
            parts.append(np.array([neuron.bias]))
        parts.append(np.array([self.output_weight]))
        return np.concatenate(parts)

    def with_parameters(self, vector: np.ndarray) -> "ChainUnit":
        if vector.shape != (self.parameter_count,):
            raise ShapeError(f"expected {self.parameter_count} chain parameters, got {vector.shape}")
        neurons = []
        offset = 0
        for neuron in self.chain:
            width = neuron.input_weights.size
            weights = vector[offset:offset + width]
            offset += width
            chain_weight = None
            if neuron.chain_weight is not None:
                chain_weight = vector[offset]
                offset += 1
            bias = vector[offset]
            offset += 1
            neurons.append(ChainNeuron(weights, chain_weight, bias, neuron.activation))
        return ChainUnit(tuple(neurons), vector[offset])

    def backward(
        self,
        base_activations: Sequence[np.ndarray],
        output_grad: np.ndarray,
    ) -> Tuple[np.ndarray, Dict[int, np.ndarray]]:
        """Gradient w.r.t. chain parameters and w.r.t. the base activations it reads.

        Returns:
            (flat gradient in parameter_vector order,
             {base layer index: dLoss/d activations} for hidden layers only)
        """
        pre, post = self.trace(base_activations)
        d_output_weight = float(output_grad @ post[-1])
        dc = output_grad * self.output_weight
        per_neuron: List[np.ndarray] = []
        extra: Dict[int, np.ndarray] = {}
        for j in range(self.depth_span - 1, -1, -1):
            neuron = self.chain[j]
            du = dc * neuron.activation.derivative(pre[j], post[j])
            parts = [base_activations[j].T @ du]
            if neuron.chain_weight is not None:
                parts.append(np.array([du @ post[j - 1]]))
                dc = du * neuron.chain_weight
            parts.append(np.array([du.sum()]))
            per_neuron.append(np.concatenate(parts))
            if j > 0:
                # layer 0 is the raw input matrix and carries no parameters
                extra[j] = np.outer(du, neuron.input_weights)
        per_neuron.reverse()
        return np.concatenate(per_neuron + [np.array([d_output_weight])]), extra


@dataclass(frozen=True, eq=False)
class PerturbationBlock:
    """One inflate application: a chain plus its cached semantics on both splits.

    Cached semantics are computed once when the block is built and never
    change; offspring share blocks by reference.
    """

    unit: ChainUnit
    cached_train_semantics: Semantics
    cached_test_semantics: Semantics

    def __post_init__(self):
        for name in ("cached_train_semantics", "cached_test_semantics"):
            values = np.array(getattr(self, name), dtype=np.float64).reshape(-1)
            values.setflags(write=False)
            object.__setattr__(self, name, values)

    @property
    def chain(self) -> Tuple[ChainNeuron, ...]:
        return self.unit.chain

    @property
    def output_weight(self) -> float:
        return self.unit.output_weight

    @property
    def depth_span(self) -> int:
        return self.unit.depth_span

    @property
    def parameter_count(self) -> int:
        return self.unit.parameter_count

    @classmethod
    def from_unit(
        cls,
        unit: ChainUnit,
        train_activations: Sequence[np.ndarray],
        test_activations: Sequence[np.ndarray],
    ) -> "PerturbationBlock":
        unit.check_attachment(train_activations)
        return cls(unit, unit.semantics(train_activations), unit.semantics(test_activations))
