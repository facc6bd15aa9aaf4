"""
Dense-layer data types: layer specifications, weight sets, activation
profiles and SGD training configuration.
"""
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterator, Optional, Sequence

import numpy as np

from utils.exceptions import ConfigurationError, ShapeError


class Activation(str, Enum):
    """Post-affine nonlinearity of a dense layer."""

    RELU = "relu"
    SOFTMAX = "softmax"
    IDENTITY = "identity"


@dataclass(frozen=True)
class LayerSpec:
    """Shape and nonlinearity of one dense layer."""

    input_size: int
    output_size: int
    activation: Activation = Activation.RELU

    def __post_init__(self) -> None:
        if int(self.input_size) < 1 or int(self.output_size) < 1:
            raise ConfigurationError(
                f"layer sizes must be >= 1, got {self.input_size}->{self.output_size}"
            )
        object.__setattr__(self, "activation", Activation(self.activation))

    def to_dict(self) -> dict:
        return {
            "input_size": int(self.input_size),
            "output_size": int(self.output_size),
            "activation": self.activation.value,
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "LayerSpec":
        return cls(int(payload["input_size"]), int(payload["output_size"]), Activation(payload["activation"]))


def validate_specs(specs: Sequence[LayerSpec]) -> None:
    """
    Check that a layer list forms a valid chain.

    Args:
        specs: Ordered layer specifications

    Raises:
        ConfigurationError: empty chain, incompatible sizes or a non-final Softmax
    """
    if not specs:
        raise ConfigurationError("a network needs at least one layer")
    for index, (left, right) in enumerate(zip(specs, specs[1:])):
        if left.output_size != right.input_size:
            raise ConfigurationError(
                f"layer {index} outputs {left.output_size} values but layer {index + 1} "
                f"expects {right.input_size}"
            )
    for index, spec in enumerate(specs[:-1]):
        if spec.activation is Activation.SOFTMAX:
            raise ConfigurationError(f"Softmax is only allowed on the final layer (found on layer {index})")


def classifier_specs(input_size: int, hidden_sizes: Sequence[int], num_classes: int) -> list[LayerSpec]:
    """
    Build the ReLU-hidden, Softmax-output classifier chain.

    Args:
        input_size: Number of input features
        hidden_sizes: Widths of the hidden layers
        num_classes: Number of output classes

    Returns:
        Layer specifications
    """
    sizes = [int(input_size), *(int(h) for h in hidden_sizes)]
    specs = [LayerSpec(a, b, Activation.RELU) for a, b in zip(sizes, sizes[1:])]
    specs.append(LayerSpec(sizes[-1], int(num_classes), Activation.SOFTMAX))
    validate_specs(specs)
    return specs


@dataclass
class Layer:
    """One dense layer: weights [output_size x input_size], bias [output_size]."""

    weights: np.ndarray
    bias: np.ndarray
    spec: LayerSpec


@dataclass
class WeightSet:
    """Ordered dense-layer parameters of one model instance."""

    layers: list[Layer]

    def __post_init__(self) -> None:
        validate_specs(self.specs)
        for index, layer in enumerate(self.layers):
            expected = (layer.spec.output_size, layer.spec.input_size)
            if layer.weights.shape != expected or layer.bias.shape != (layer.spec.output_size,):
                raise ShapeError(
                    f"layer {index}: weights {layer.weights.shape} / bias {layer.bias.shape} "
                    f"do not match spec {expected}"
                )

    def __iter__(self) -> Iterator[Layer]:
        return iter(self.layers)

    def __len__(self) -> int:
        return len(self.layers)

    @property
    def specs(self) -> list[LayerSpec]:
        return [layer.spec for layer in self.layers]

    @property
    def dtype(self) -> np.dtype:
        return self.layers[0].weights.dtype

    @property
    def input_size(self) -> int:
        return self.layers[0].spec.input_size

    @property
    def output_size(self) -> int:
        return self.layers[-1].spec.output_size

    @property
    def layer_sizes(self) -> list[int]:
        """Output width of every layer (the profile segment lengths)."""
        return [layer.spec.output_size for layer in self.layers]

    @property
    def profile_length(self) -> int:
        """Total activation count across all layers."""
        return sum(self.layer_sizes)

    @property
    def num_parameters(self) -> int:
        return sum(layer.weights.size + layer.bias.size for layer in self.layers)

    def copy(self) -> "WeightSet":
        return WeightSet([Layer(l.weights.copy(), l.bias.copy(), l.spec) for l in self.layers])

    def astype(self, dtype: np.dtype) -> "WeightSet":
        return WeightSet([Layer(l.weights.astype(dtype), l.bias.astype(dtype), l.spec) for l in self.layers])

    def flatten(self) -> np.ndarray:
        """All parameters as one float64 vector (weights then bias, layer by layer)."""
        parts = []
        for layer in self.layers:
            parts.append(layer.weights.ravel())
            parts.append(layer.bias.ravel())
        return np.concatenate(parts).astype(np.float64)

    def with_flat(self, vector: np.ndarray) -> "WeightSet":
        """
        Rebuild a congruent WeightSet from a flat vector.

        Args:
            vector: Parameters in ``flatten()`` order

        Returns:
            New WeightSet in this set's dtype
        """
        vector = np.asarray(vector)
        if vector.shape != (self.num_parameters,):
            raise ShapeError(f"expected {self.num_parameters} parameters, got {vector.shape}")
        layers, cursor = [], 0
        for layer in self.layers:
            w_size, b_size = layer.weights.size, layer.bias.size
            weights = vector[cursor:cursor + w_size].reshape(layer.weights.shape).astype(self.dtype)
            cursor += w_size
            bias = vector[cursor:cursor + b_size].astype(self.dtype)
            cursor += b_size
            layers.append(Layer(weights, bias, layer.spec))
        return WeightSet(layers)

    def same_architecture(self, other: "WeightSet") -> bool:
        return self.specs == other.specs

    def bitwise_equal(self, other: "WeightSet") -> bool:
        if not self.same_architecture(other):
            return False
        return all(
            a.weights.dtype == b.weights.dtype
            and np.array_equal(a.weights, b.weights)
            and np.array_equal(a.bias, b.bias)
            for a, b in zip(self.layers, other.layers)
        )

    def is_finite(self) -> bool:
        return all(np.all(np.isfinite(l.weights)) and np.all(np.isfinite(l.bias)) for l in self.layers)


def layer_offsets(sizes: Sequence[int]) -> tuple[tuple[int, int], ...]:
    """Contiguous (start, length) pairs for consecutive segment sizes."""
    offsets, start = [], 0
    for size in sizes:
        offsets.append((start, int(size)))
        start += int(size)
    return tuple(offsets)


@dataclass
class ActivationProfile:
    """Concatenated per-layer activation vector with its layer segmentation."""

    values: np.ndarray
    layer_offsets: tuple[tuple[int, int], ...]

    def __post_init__(self) -> None:
        self.layer_offsets = tuple((int(s), int(n)) for s, n in self.layer_offsets)
        cursor = 0
        for start, length in self.layer_offsets:
            if start != cursor or length < 1:
                raise ShapeError(f"layer offsets must be contiguous and non-empty: {self.layer_offsets}")
            cursor += length
        if self.values.ndim != 1 or self.values.shape[0] != cursor:
            raise ShapeError(f"profile has {self.values.shape} values but offsets cover {cursor}")

    def __len__(self) -> int:
        return int(self.values.shape[0])

    @property
    def num_layers(self) -> int:
        return len(self.layer_offsets)

    def layer(self, index: int) -> np.ndarray:
        start, length = self.layer_offsets[index]
        return self.values[start:start + length]


@dataclass(frozen=True)
class TrainConfig:
    """Mini-batch SGD settings for one call of ``train``."""

    epochs: int = 5
    learning_rate: float = 0.02
    batch_size: int = 20
    seed: int = 0

    def __post_init__(self) -> None:
        if self.epochs < 0:
            raise ConfigurationError(f"epochs must be >= 0, got {self.epochs}")
        if self.learning_rate < 0:
            raise ConfigurationError(f"learning_rate must be >= 0, got {self.learning_rate}")
        if self.batch_size < 1:
            raise ConfigurationError(f"batch_size must be >= 1, got {self.batch_size}")


@dataclass
class TrainResult:
    """Trained weights plus the mean loss of every epoch."""

    weights: WeightSet
    epoch_losses: list[float] = field(default_factory=list)

    @property
    def final_loss(self) -> Optional[float]:
        return self.epoch_losses[-1] if self.epoch_losses else None
