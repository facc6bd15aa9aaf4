"""
Dense feedforward engine: initialisation, forward passes that capture every
layer's post-nonlinearity activations, and exact backpropagation for the
supported losses.
"""
from dataclasses import dataclass
from enum import Enum
from typing import Optional, Sequence

import numpy as np

from network.layers import (
    Activation,
    ActivationProfile,
    Layer,
    LayerSpec,
    WeightSet,
    layer_offsets,
    validate_specs,
)
from utils.exceptions import ConfigurationError, InputError, ShapeError
from utils.seeding import make_rng

_LOG_FLOOR = 1e-12


class LossKind(str, Enum):
    """Losses with analytic gradients."""

    CROSS_ENTROPY = "cross_entropy"
    SQUARED_ERROR = "squared_error"
    LAYERWISE_RMSE = "layerwise_rmse"


@dataclass
class ForwardCache:
    """Inputs and per-layer pre/post activations of one forward pass."""

    inputs: np.ndarray
    pre_activations: list[np.ndarray]
    activations: list[np.ndarray]

    @property
    def outputs(self) -> np.ndarray:
        return self.activations[-1]


def init_weights(specs: Sequence[LayerSpec], seed: int, dtype: np.dtype = np.float32) -> WeightSet:
    """
    Draw a fresh WeightSet.

    Weights are uniform in +-sqrt(6 / (fan_in + fan_out)), biases are zero.

    Args:
        specs: Ordered layer specifications
        seed: Seed of the initialisation stream
        dtype: Parameter dtype (float32 for training, float64 for gradient checks)

    Returns:
        Initialised WeightSet

    Raises:
        ConfigurationError: if the specs do not chain
    """
    specs = list(specs)
    validate_specs(specs)
    rng = make_rng(seed, "init-weights")
    layers = []
    for spec in specs:
        bound = np.sqrt(6.0 / (spec.input_size + spec.output_size))
        # largest representable limit not above the bound, so casting cannot overshoot
        limit = np.dtype(dtype).type(bound)
        if float(limit) > bound:
            limit = np.nextafter(limit, np.dtype(dtype).type(0))
        weights = rng.uniform(-float(limit), float(limit), size=(spec.output_size, spec.input_size)).astype(dtype)
        layers.append(Layer(weights, np.zeros(spec.output_size, dtype=dtype), spec))
    return WeightSet(layers)


def _activate(z: np.ndarray, kind: Activation) -> np.ndarray:
    if kind is Activation.RELU:
        return np.maximum(z, 0)
    if kind is Activation.SOFTMAX:
        shifted = z - z.max(axis=1, keepdims=True)
        exp = np.exp(shifted)
        return exp / exp.sum(axis=1, keepdims=True)
    return z


def _check_batch(w: WeightSet, batch: np.ndarray) -> np.ndarray:
    batch = np.asarray(batch)
    if batch.ndim == 1:
        batch = batch[np.newaxis, :]
    if batch.ndim != 2 or batch.shape[1] != w.input_size:
        raise ShapeError(f"batch of shape {batch.shape} does not fit input size {w.input_size}")
    if not np.all(np.isfinite(batch)):
        raise InputError("batch contains non-finite values")
    return batch.astype(w.dtype, copy=False)


def forward_cache(w: WeightSet, batch: np.ndarray) -> ForwardCache:
    """
    Run a forward pass keeping everything backpropagation needs.

    Args:
        w: Model weights
        batch: Input rows [B x input_size]

    Returns:
        ForwardCache
    """
    x = _check_batch(w, batch)
    pre, post = [], []
    a = x
    for layer in w.layers:
        z = a @ layer.weights.T + layer.bias
        a = _activate(z, layer.spec.activation)
        pre.append(z)
        post.append(a)
    return ForwardCache(inputs=x, pre_activations=pre, activations=post)


def activation_matrix(w: WeightSet, batch: np.ndarray) -> tuple[np.ndarray, tuple[tuple[int, int], ...]]:
    """
    Concatenate every layer's activations row-wise.

    Args:
        w: Model weights
        batch: Input rows

    Returns:
        ([B x profile_length] matrix, layer offsets)
    """
    cache = forward_cache(w, batch)
    return np.concatenate(cache.activations, axis=1), layer_offsets(w.layer_sizes)


def forward(w: WeightSet, batch: np.ndarray) -> tuple[np.ndarray, list[ActivationProfile]]:
    """
    Forward pass returning outputs and one ActivationProfile per input row.

    Args:
        w: Model weights
        batch: Input rows

    Returns:
        (final-layer outputs, per-row profiles)
    """
    matrix, offsets = activation_matrix(w, batch)
    outputs = matrix[:, offsets[-1][0]:]
    return outputs, [ActivationProfile(row, offsets) for row in matrix]


def predict(w: WeightSet, batch: np.ndarray, chunk_size: int = 2048) -> np.ndarray:
    """
    Argmax class predictions, evaluated in chunks.

    Args:
        w: Model weights
        batch: Input rows
        chunk_size: Rows per forward pass

    Returns:
        Integer class ids
    """
    batch = np.asarray(batch)
    predictions = np.empty(batch.shape[0], dtype=np.int64)
    for start in range(0, batch.shape[0], chunk_size):
        cache = forward_cache(w, batch[start:start + chunk_size])
        predictions[start:start + chunk_size] = np.argmax(cache.outputs, axis=1)
    return predictions


def backward(w: WeightSet, cache: ForwardCache, output_grad: np.ndarray,
             output_pre_grad: Optional[np.ndarray] = None) -> WeightSet:
    """
    Backpropagate a loss gradient through the chain.

    Args:
        w: Model weights used for the forward pass
        cache: Forward cache of that pass
        output_grad: dLoss/d(final post-activation), [B x output_size]
        output_pre_grad: dLoss/d(final pre-activation); when given, replaces
            the final-layer activation Jacobian (softmax + cross-entropy)

    Returns:
        Gradient as a WeightSet congruent to ``w``
    """
    grads: list[Optional[Layer]] = [None] * len(w.layers)
    delta = None
    for index in range(len(w.layers) - 1, -1, -1):
        layer = w.layers[index]
        z = cache.pre_activations[index]
        a = cache.activations[index]
        if index == len(w.layers) - 1:
            if output_pre_grad is not None:
                dz = output_pre_grad
            else:
                dz = _activation_backward(output_grad, z, a, layer.spec.activation)
        else:
            dz = _activation_backward(delta, z, a, layer.spec.activation)
        inputs = cache.activations[index - 1] if index > 0 else cache.inputs
        grads[index] = Layer(
            (dz.T @ inputs).astype(w.dtype),
            dz.sum(axis=0).astype(w.dtype),
            layer.spec,
        )
        delta = dz @ layer.weights
    return WeightSet(grads)


def _activation_backward(grad: np.ndarray, z: np.ndarray, a: np.ndarray, kind: Activation) -> np.ndarray:
    if kind is Activation.RELU:
        return grad * (z > 0)
    if kind is Activation.SOFTMAX:
        return a * (grad - np.sum(grad * a, axis=1, keepdims=True))
    return grad


def _layerwise_rmse_terms(outputs: np.ndarray, targets: np.ndarray,
                          offsets: Sequence[tuple[int, int]]) -> tuple[float, np.ndarray]:
    rows = outputs.shape[0]
    residual = outputs.astype(np.float64) - targets.astype(np.float64)
    grad = np.zeros_like(residual)
    total = 0.0
    num_layers = len(offsets)
    for start, length in offsets:
        segment = residual[:, start:start + length]
        rmse = np.sqrt(np.sum(segment ** 2, axis=1) / length)
        total += float(rmse.sum())
        safe = np.where(rmse > 0, rmse, 1.0)
        grad[:, start:start + length] = np.where(
            rmse[:, None] > 0, segment / (length * safe[:, None]), 0.0
        ) / (num_layers * rows)
    return total / (num_layers * rows), grad


def loss_and_gradient(w: WeightSet, batch: np.ndarray, targets: np.ndarray, loss_kind: LossKind,
                      layer_offsets_: Optional[Sequence[tuple[int, int]]] = None) -> tuple[float, WeightSet]:
    """
    Compute a batch-mean loss and its exact gradient.

    Args:
        w: Model weights
        batch: Input rows [B x input_size]
        targets: Integer labels (cross-entropy) or real targets [B x output_size]
        loss_kind: Loss to differentiate
        layer_offsets_: Output segmentation for LAYERWISE_RMSE (default: one segment)

    Returns:
        (loss as float64, gradient WeightSet)
    """
    loss_kind = LossKind(loss_kind)
    cache = forward_cache(w, batch)
    outputs = cache.outputs
    rows = outputs.shape[0]

    if loss_kind is LossKind.CROSS_ENTROPY:
        labels = np.asarray(targets, dtype=np.int64).reshape(-1)
        if labels.shape[0] != rows:
            raise ShapeError(f"{labels.shape[0]} labels for {rows} rows")
        if labels.size and (labels.min() < 0 or labels.max() >= w.output_size):
            raise InputError(f"labels must lie in [0, {w.output_size})")
        probs = outputs.astype(np.float64)
        picked = probs[np.arange(rows), labels]
        loss = float(-np.mean(np.log(np.maximum(picked, _LOG_FLOOR))))
        if w.layers[-1].spec.activation is Activation.SOFTMAX:
            pre_grad = probs.copy()
            pre_grad[np.arange(rows), labels] -= 1.0
            pre_grad /= rows
            return loss, backward(w, cache, None, output_pre_grad=pre_grad.astype(w.dtype))
        out_grad = np.zeros_like(probs)
        out_grad[np.arange(rows), labels] = -1.0 / (np.maximum(picked, _LOG_FLOOR) * rows)
        return loss, backward(w, cache, out_grad.astype(w.dtype))

    targets = np.asarray(targets)
    if targets.shape != outputs.shape:
        raise ShapeError(f"targets {targets.shape} do not match outputs {outputs.shape}")

    if loss_kind is LossKind.SQUARED_ERROR:
        residual = outputs.astype(np.float64) - targets.astype(np.float64)
        loss = float(np.mean(residual ** 2))
        out_grad = 2.0 * residual / residual.size
        return loss, backward(w, cache, out_grad.astype(w.dtype))

    offsets = tuple(layer_offsets_) if layer_offsets_ is not None else ((0, w.output_size),)
    if sum(length for _, length in offsets) != w.output_size:
        raise ShapeError(f"offsets {offsets} do not cover {w.output_size} outputs")
    loss, out_grad = _layerwise_rmse_terms(outputs, targets, offsets)
    return loss, backward(w, cache, out_grad.astype(w.dtype))


def gradient(w: WeightSet, batch: np.ndarray, targets: np.ndarray, loss_kind: LossKind,
             layer_offsets_: Optional[Sequence[tuple[int, int]]] = None) -> WeightSet:
    """Gradient-only view of :func:`loss_and_gradient`."""
    return loss_and_gradient(w, batch, targets, loss_kind, layer_offsets_)[1]


def batch_loss(w: WeightSet, batch: np.ndarray, targets: np.ndarray, loss_kind: LossKind,
               layer_offsets_: Optional[Sequence[tuple[int, int]]] = None) -> float:
    """Loss without the gradient (used by finite-difference checks and evaluation)."""
    loss_kind = LossKind(loss_kind)
    outputs = forward_cache(w, batch).outputs
    if loss_kind is LossKind.CROSS_ENTROPY:
        labels = np.asarray(targets, dtype=np.int64).reshape(-1)
        picked = outputs.astype(np.float64)[np.arange(outputs.shape[0]), labels]
        return float(-np.mean(np.log(np.maximum(picked, _LOG_FLOOR))))
    if loss_kind is LossKind.SQUARED_ERROR:
        return float(np.mean((outputs.astype(np.float64) - np.asarray(targets, dtype=np.float64)) ** 2))
    offsets = tuple(layer_offsets_) if layer_offsets_ is not None else ((0, w.output_size),)
    return _layerwise_rmse_terms(outputs, np.asarray(targets), offsets)[0]


def sgd_step(w: WeightSet, grad: WeightSet, learning_rate: float) -> WeightSet:
    """
    Return ``w - learning_rate * grad`` as a new WeightSet.

    Raises:
        ConfigurationError: if the gradient is not congruent to the weights
    """
    if not w.same_architecture(grad):
        raise ConfigurationError("gradient architecture differs from weights")
    lr = w.dtype.type(learning_rate)
    return WeightSet([
        Layer(layer.weights - lr * g.weights, layer.bias - lr * g.bias, layer.spec)
        for layer, g in zip(w.layers, grad.layers)
    ])
