"""Dense feedforward regression networks.

Parameter ordering (``parameter_vector`` / ``gradient``): layer by layer from
the input side; within a layer the weight matrix row-major (one row per
neuron, one column per incoming activation), followed by the bias vector.
"""

from dataclasses import dataclass
from typing import Dict, List, Optional, Protocol, Sequence, Tuple

import numpy as np

from core.exceptions import ConfigurationError, DivergenceError, ShapeError
from network.activations import (
    DEFAULT_POOL,
    Activation,
    apply_columns,
    derivative_columns,
)
from network.dataset import Dataset
from network.metrics import Semantics


@dataclass(frozen=True)
class ArchitectureConfig:
    """Sampling ranges for random base networks (inclusive integer ranges)."""

    depth_range: Tuple[int, int] = (1, 3)
    width_range: Tuple[int, int] = (4, 16)
    weight_range: Tuple[float, float] = (-1.0, 1.0)
    activation_pool: Tuple[Activation, ...] = DEFAULT_POOL

    def validate(self) -> None:
        lo, hi = self.depth_range
        if lo < 0 or hi < lo:
            raise ConfigurationError(f"empty hidden depth range {self.depth_range}")
        lo, hi = self.width_range
        if lo < 1 or hi < lo:
            raise ConfigurationError(f"empty width range {self.width_range}")
        lo, hi = self.weight_range
        if not (np.isfinite(lo) and np.isfinite(hi)) or hi < lo:
            raise ConfigurationError(f"empty weight range {self.weight_range}")
        if not self.activation_pool:
            raise ConfigurationError("activation pool is empty")


@dataclass(frozen=True)
class OptimizerConfig:
    """Full-batch gradient descent settings."""

    learning_rate: float = 0.01
    epochs: int = 100

    def validate(self) -> None:
        if not self.learning_rate > 0:
            raise ConfigurationError(f"learning_rate must be > 0, got {self.learning_rate}")
        if self.epochs < 0:
            raise ConfigurationError(f"epochs must be >= 0, got {self.epochs}")


@dataclass(frozen=True, eq=False)
class DenseLayer:
    """Fully connected layer with one activation per neuron; arrays are read-only copies."""

    weights: np.ndarray  # (out, in)
    bias: np.ndarray  # (out,)
    activations: Tuple[Activation, ...]

    def __post_init__(self):
        weights = np.array(self.weights, dtype=np.float64)
        bias = np.array(self.bias, dtype=np.float64).reshape(-1)
        if weights.ndim != 2 or weights.shape[0] != bias.shape[0]:
            raise ShapeError(f"weights {weights.shape} do not match bias {bias.shape}")
        if len(self.activations) != weights.shape[0]:
            raise ShapeError(
                f"{len(self.activations)} activations for a layer of {weights.shape[0]} neurons"
            )
        if not (np.all(np.isfinite(weights)) and np.all(np.isfinite(bias))):
            raise ShapeError("layer parameters must be finite")
        weights.setflags(write=False)
        bias.setflags(write=False)
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "bias", bias)
        object.__setattr__(self, "activations", tuple(self.activations))

    @property
    def out_dim(self) -> int:
        return self.weights.shape[0]

    @property
    def in_dim(self) -> int:
        return self.weights.shape[1]

    @property
    def parameter_count(self) -> int:
        return self.weights.size + self.bias.size


@dataclass(frozen=True)
class ForwardTrace:
    """Per-layer pre-activations and activations; ``post[0]`` is the input matrix."""

    pre: Tuple[np.ndarray, ...]
    post: Tuple[np.ndarray, ...]

    @property
    def output(self) -> np.ndarray:
        return self.post[-1][:, 0]


@dataclass(frozen=True, eq=False)
class MlpNetwork:
    """Immutable feed-forward network: hidden layers then a single Identity output neuron."""

    input_dim: int
    layers: Tuple[DenseLayer, ...]

    def __post_init__(self):
        layers = tuple(self.layers)
        if self.input_dim < 1:
            raise ShapeError(f"input_dim must be >= 1, got {self.input_dim}")
        if not layers:
            raise ShapeError("a network needs at least its output layer")
        width = self.input_dim
        for i, layer in enumerate(layers):
            if layer.in_dim != width:
                raise ShapeError(f"layer {i} expects {layer.in_dim} inputs, previous width is {width}")
            width = layer.out_dim
        head = layers[-1]
        if head.out_dim != 1 or head.activations[0] is not Activation.IDENTITY:
            raise ShapeError("output layer must be a single Identity neuron")
        object.__setattr__(self, "layers", layers)

    # ---- structure ----

    @property
    def depth(self) -> int:
        """Number of hidden layers."""
        return len(self.layers) - 1

    @property
    def hidden_widths(self) -> Tuple[int, ...]:
        return tuple(layer.out_dim for layer in self.layers[:-1])

    @property
    def node_count(self) -> int:
        """Hidden plus output neurons; inputs are not nodes."""
        return sum(layer.out_dim for layer in self.layers)

    @property
    def parameter_count(self) -> int:
        return sum(layer.parameter_count for layer in self.layers)

    # ---- parameters ----

    def parameter_vector(self) -> np.ndarray:
        """Flat copy of every parameter: per layer, weights row-major then biases."""
        parts = []
        for layer in self.layers:
            parts.append(layer.weights.ravel())
            parts.append(layer.bias)
        return np.concatenate(parts)

    def with_parameters(self, vector: np.ndarray) -> "MlpNetwork":
        """Same architecture and activations with new parameters.

        Args:
            vector: Flat parameters in ``parameter_vector`` order

        Returns:
            New network; this one is unchanged

        Raises:
            ShapeError: wrong vector length
        """
        vector = np.asarray(vector, dtype=np.float64)
        if vector.shape != (self.parameter_count,):
            raise ShapeError(f"expected {self.parameter_count} parameters, got {vector.shape}")
        layers = []
        offset = 0
        for layer in self.layers:
            n_w = layer.weights.size
            weights = vector[offset:offset + n_w].reshape(layer.weights.shape)
            offset += n_w
            bias = vector[offset:offset + layer.out_dim]
            offset += layer.out_dim
            layers.append(DenseLayer(weights, bias, layer.activations))
        return MlpNetwork(self.input_dim, tuple(layers))

    # ---- evaluation ----

    def trace(self, inputs: np.ndarray) -> ForwardTrace:
        """Forward pass keeping every layer's pre-activations and activations.

        Args:
            inputs: (rows, input_dim) matrix

        Returns:
            ForwardTrace; chains read the hidden activations from it
        """
        inputs = np.asarray(inputs, dtype=np.float64)
        if inputs.ndim != 2 or inputs.shape[1] != self.input_dim:
            raise ShapeError(f"network expects {self.input_dim} features, got shape {inputs.shape}")
        pre: List[np.ndarray] = [inputs]
        post: List[np.ndarray] = [inputs]
        a = inputs
        for layer in self.layers:
            z = a @ layer.weights.T + layer.bias
            a = apply_columns(z, layer.activations)
            pre.append(z)
            post.append(a)
        return ForwardTrace(tuple(pre), tuple(post))

    def forward(self, data: Dataset) -> Semantics:
        """Output per row of ``data``."""
        _check_features(self.input_dim, data)
        return self.trace(data.inputs).output

    def backward(
        self,
        trace: ForwardTrace,
        output_grad: np.ndarray,
        extra_activation_grads: Optional[Dict[int, np.ndarray]] = None,
    ) -> np.ndarray:
        """Gradient of the loss w.r.t. this network's parameters.

        Args:
            trace: forward trace of the batch
            output_grad: dLoss/dOutput per row
            extra_activation_grads: additional dLoss/da for hidden layer
                activations (key = layer index in ``trace.post``), used when
                other units read this network's activations

        Returns:
            Flat gradient in canonical parameter order
        """
        extra = extra_activation_grads or {}
        grads: List[Tuple[np.ndarray, np.ndarray]] = []
        da = np.asarray(output_grad, dtype=np.float64).reshape(-1, 1)
        for idx in range(len(self.layers), 0, -1):
            layer = self.layers[idx - 1]
            z, a = trace.pre[idx], trace.post[idx]
            if idx in extra:
                da = da + extra[idx]
            dz = da * derivative_columns(z, a, layer.activations)
            grads.append((dz.T @ trace.post[idx - 1], dz.sum(axis=0)))
            da = dz @ layer.weights
        parts = []
        for dw, db in reversed(grads):
            parts.append(dw.ravel())
            parts.append(db)
        return np.concatenate(parts)

    def loss_and_gradient(self, data: Dataset) -> Tuple[float, np.ndarray]:
        """Mean squared error on ``data`` and its gradient in canonical parameter order."""
        _check_features(self.input_dim, data)
        trace = self.trace(data.inputs)
        residual = trace.output - data.targets
        n = data.row_count
        loss = float(np.mean(residual * residual))
        return loss, self.backward(trace, 2.0 * residual / n)


class Differentiable(Protocol):
    """Anything train_backprop can fine-tune."""

    input_dim: int

    def parameter_vector(self) -> np.ndarray: ...

    def with_parameters(self, vector: np.ndarray) -> "Differentiable": ...

    def loss_and_gradient(self, data: Dataset) -> Tuple[float, np.ndarray]: ...


def _check_features(input_dim: int, data: Dataset) -> None:
    if data.feature_count != input_dim:
        raise ShapeError(f"model expects {input_dim} features, dataset has {data.feature_count}")


def _uniform_int(rng: np.random.Generator, bounds: Tuple[int, int]) -> int:
    return int(rng.integers(bounds[0], bounds[1] + 1))


def build_mlp(
    input_dim: int,
    hidden_widths: Sequence[int],
    rng: np.random.Generator,
    weight_range: Tuple[float, float] = (-1.0, 1.0),
    activation_pool: Sequence[Activation] = DEFAULT_POOL,
) -> MlpNetwork:
    """Random network of a fixed shape with a single Identity output neuron."""
    low, high = weight_range
    pool = tuple(activation_pool)
    layers = []
    width = input_dim
    for out_dim in hidden_widths:
        weights = rng.uniform(low, high, size=(out_dim, width))
        bias = rng.uniform(low, high, size=out_dim)
        acts = tuple(pool[i] for i in rng.integers(0, len(pool), size=out_dim))
        layers.append(DenseLayer(weights, bias, acts))
        width = out_dim
    weights = rng.uniform(low, high, size=(1, width))
    bias = rng.uniform(low, high, size=1)
    layers.append(DenseLayer(weights, bias, (Activation.IDENTITY,)))
    return MlpNetwork(input_dim, tuple(layers))


def random_mlp(
    input_dim: int,
    rng: np.random.Generator,
    arch_cfg: Optional[ArchitectureConfig] = None,
) -> MlpNetwork:
    """Sample depth, widths, weights and hidden activations uniformly."""
    arch_cfg = arch_cfg or ArchitectureConfig()
    arch_cfg.validate()
    if input_dim < 1:
        raise ConfigurationError(f"input_dim must be >= 1, got {input_dim}")
    depth = _uniform_int(rng, arch_cfg.depth_range)
    widths = [_uniform_int(rng, arch_cfg.width_range) for _ in range(depth)]
    return build_mlp(input_dim, widths, rng, arch_cfg.weight_range, arch_cfg.activation_pool)


def forward(net: MlpNetwork, data: Dataset) -> Semantics:
    """Semantics of ``net`` on ``data`` (one output per row)."""
    return net.forward(data)


def gradient(net: MlpNetwork, data: Dataset) -> np.ndarray:
    """dMSE/dparameter for every weight and bias, in canonical order."""
    return net.loss_and_gradient(data)[1]


def train_backprop(model, data: Dataset, opt_cfg: OptimizerConfig) -> Tuple[object, List[float]]:
    """Full-batch gradient descent on mean squared error.

    Works on any ``Differentiable`` (plain networks and materialized
    composites alike).

    Returns:
        (trained model, loss per epoch measured before that epoch's step)

    Raises:
        DivergenceError: the loss or the updated parameters became non-finite
    """
    opt_cfg.validate()
    if opt_cfg.epochs == 0:
        return model, []
    params = model.parameter_vector().copy()
    losses: List[float] = []
    current = model
    for epoch in range(1, opt_cfg.epochs + 1):
        loss, grad = current.loss_and_gradient(data)
        if not np.isfinite(loss) or not np.all(np.isfinite(grad)):
            raise DivergenceError(epoch, losses)
        losses.append(loss)
        params = params - opt_cfg.learning_rate * grad
        if not np.all(np.isfinite(params)):
            raise DivergenceError(epoch, losses)
        current = current.with_parameters(params)
    return current, losses
