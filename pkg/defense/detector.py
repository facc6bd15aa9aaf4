"""
Sub-autoencoder detector. One encoder/decoder stack per model layer, each
consuming exactly that layer's slice of the activation profile; the
per-layer codes together form the shared code layer.

Sub-network for a model layer of width s (ReLU everywhere except the
Identity output):

    s -> ceil(s/2) -> ceil(s/4) -> ceil(s/8) (code) -> ceil(s/4) -> ceil(s/2) -> s
"""
import math
from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np

from data.batching import batch_indices
from network.layers import Activation, ActivationProfile, LayerSpec, WeightSet, layer_offsets
from network.model import LossKind, forward_cache, init_weights, loss_and_gradient, sgd_step
from utils.exceptions import DefenseError, ShapeError
from utils.logger import get_logger
from utils.seeding import derive_seed

logger = get_logger(__name__)


def subnet_widths(size: int) -> tuple[int, int, int]:
    """Encoder hidden widths and code width for a layer of ``size`` activations."""
    return tuple(max(1, math.ceil(size / div)) for div in (2, 4, 8))  # type: ignore[return-value]


def subnet_specs(size: int) -> list[LayerSpec]:
    """Layer chain of the encoder/decoder pair for one model layer."""
    h1, h2, code = subnet_widths(size)
    sizes = [size, h1, h2, code, h2, h1, size]
    specs = [LayerSpec(a, b, Activation.RELU) for a, b in zip(sizes, sizes[1:])]
    specs[-1] = LayerSpec(h1, size, Activation.IDENTITY)
    return specs


@dataclass
class DetectorNet:
    """Per-layer sub-autoencoders aligned with a model's activation profile."""

    subnets: list[WeightSet]
    layer_offsets: tuple[tuple[int, int], ...]
    epoch_losses: list[float] = field(default_factory=list)

    def __post_init__(self) -> None:
        if len(self.subnets) != len(self.layer_offsets):
            raise ShapeError(f"{len(self.subnets)} sub-networks for {len(self.layer_offsets)} profile segments")
        for subnet, (_, length) in zip(self.subnets, self.layer_offsets):
            if subnet.input_size != length or subnet.output_size != length:
                raise ShapeError(f"sub-network {subnet.input_size}->{subnet.output_size} for a {length}-wide segment")

    @property
    def input_size(self) -> int:
        return sum(length for _, length in self.layer_offsets)

    @property
    def num_layers(self) -> int:
        return len(self.subnets)

    @property
    def code_size(self) -> int:
        """Width of the concatenated code layer."""
        return sum(subnet_widths(length)[2] for _, length in self.layer_offsets)

    def slices(self, matrix: np.ndarray) -> list[np.ndarray]:
        return [matrix[:, start:start + length] for start, length in self.layer_offsets]

    def reconstruct(self, matrix: np.ndarray) -> np.ndarray:
        """
        Reconstruct profile rows.

        Args:
            matrix: Profiles [rows x input_size]

        Returns:
            float64 reconstructions of the same shape
        """
        matrix = np.atleast_2d(np.asarray(matrix))
        if matrix.shape[1] != self.input_size:
            raise ShapeError(f"profile width {matrix.shape[1]} != detector input {self.input_size}")
        parts = [
            forward_cache(subnet, part).outputs.astype(np.float64)
            for subnet, part in zip(self.subnets, self.slices(matrix))
        ]
        return np.concatenate(parts, axis=1)

    def copy(self) -> "DetectorNet":
        return DetectorNet([s.copy() for s in self.subnets], self.layer_offsets, list(self.epoch_losses))


def build_detector(model_specs: Sequence[LayerSpec], seed: int = 0, dtype: np.dtype = np.float32) -> DetectorNet:
    """
    Build a freshly initialised detector for a model architecture.

    Args:
        model_specs: Layer specs of the monitored model
        seed: Initialisation seed
        dtype: Parameter dtype

    Returns:
        DetectorNet with one sub-network per model layer
    """
    sizes = [spec.output_size for spec in model_specs]
    subnets = [
        init_weights(subnet_specs(size), derive_seed(seed, "detector-init", index), dtype)
        for index, size in enumerate(sizes)
    ]
    return DetectorNet(subnets, layer_offsets(sizes))


def _as_values(item: Union[ActivationProfile, np.ndarray]) -> np.ndarray:
    return np.asarray(item.values if isinstance(item, ActivationProfile) else item, dtype=np.float64)


def layerwise_loss(profile: ActivationProfile, reconstruction: Union[ActivationProfile, np.ndarray]) -> float:
    """
    Mean over layers of the per-layer RMSE between a profile and its reconstruction.

    Args:
        profile: Activation profile
        reconstruction: Reconstruction (profile or raw vector) of the same length

    Returns:
        J = (1/L) * sum_l sqrt(||a_l - a_hat_l||^2 / |a_l|)

    Raises:
        ShapeError: on length or layer-offset mismatch
    """
    if isinstance(reconstruction, ActivationProfile) and reconstruction.layer_offsets != profile.layer_offsets:
        raise ShapeError(f"layer offsets differ: {profile.layer_offsets} vs {reconstruction.layer_offsets}")
    target = _as_values(profile)
    approx = _as_values(reconstruction)
    if approx.shape != target.shape:
        raise ShapeError(f"reconstruction length {approx.shape} != profile length {target.shape}")
    residual = target - approx
    rmse = [math.sqrt(float(np.sum(residual[s:s + n] ** 2)) / n) for s, n in profile.layer_offsets]
    return sum(rmse) / len(rmse)


def detector_loss_and_gradient(det: DetectorNet, batch: np.ndarray) -> tuple[float, list[WeightSet]]:
    """
    Batch-mean layerwise loss of the detector and its gradient per sub-network.

    The loss is the mean over sub-networks of each sub-network's batch-mean
    RMSE, so every sub-network gradient carries a 1/L factor.

    Args:
        det: Detector
        batch: Profile rows [B x input_size]

    Returns:
        (loss, one gradient WeightSet per sub-network)
    """
    total, grads = 0.0, []
    for subnet, part in zip(det.subnets, det.slices(batch)):
        loss, grad = loss_and_gradient(subnet, part, part, LossKind.LAYERWISE_RMSE)
        total += loss
        grads.append(grad)
    scale = 1.0 / det.num_layers
    scaled = [g.with_flat(g.flatten() * scale) for g in grads]
    return total * scale, scaled


def train_detector(det: DetectorNet, global_profiles: Union[np.ndarray, Sequence[ActivationProfile]],
                   epochs: int, batch_size: int = 10, learning_rate: float = 0.02, seed: int = 0) -> DetectorNet:
    """
    Fit the detector to the global model's per-probe profiles.

    Args:
        det: Starting detector (left unmodified)
        global_profiles: nu profiles of the current global state (matrix or list)
        epochs: Passes over the profiles
        batch_size: SGD batch size
        learning_rate: SGD step size
        seed: Shuffle seed

    Returns:
        Trained detector with ``epoch_losses`` filled in

    Raises:
        DefenseError: if the loss or the weights become non-finite
    """
    if isinstance(global_profiles, np.ndarray):
        matrix = np.atleast_2d(global_profiles)
    else:
        matrix = np.stack([_as_values(p) for p in global_profiles])
    if matrix.shape[1] != det.input_size:
        raise ShapeError(f"profile width {matrix.shape[1]} != detector input {det.input_size}")

    trained = det.copy()
    trained.epoch_losses = []
    for epoch in range(epochs):
        batch_losses = []
        for idx in batch_indices(matrix.shape[0], batch_size, derive_seed(seed, "detector-epoch", epoch)):
            loss, grads = detector_loss_and_gradient(trained, matrix[idx])
            if not np.isfinite(loss):
                raise DefenseError(f"detector loss became non-finite in epoch {epoch}")
            trained.subnets = [sgd_step(s, g, learning_rate) for s, g in zip(trained.subnets, grads)]
            batch_losses.append(loss)
        trained.epoch_losses.append(float(np.mean(batch_losses)))
    if not all(s.is_finite() for s in trained.subnets):
        raise DefenseError("detector weights became non-finite")
    if trained.epoch_losses:
        logger.debug(f"detector loss {trained.epoch_losses[0]:.6f} -> {trained.epoch_losses[-1]:.6f}")
    return trained


def reconstruction_error(values: np.ndarray, reconstruction: np.ndarray, total_clients: int) -> float:
    """sqrt(||values - reconstruction||^2 / total_clients)."""
    residual = np.asarray(values, dtype=np.float64) - np.asarray(reconstruction, dtype=np.float64)
    return math.sqrt(float(np.dot(residual, residual)) / total_clients)


def score(det: DetectorNet, averaged_profile: Union[ActivationProfile, np.ndarray], total_clients: int) -> float:
    """
    Anomaly score of one client's averaged profile.

    Args:
        det: Trained detector
        averaged_profile: Client's mean activation profile
        total_clients: k + r

    Returns:
        Reconstruction error over the full concatenated profile
    """
    if total_clients < 1:
        raise ShapeError(f"total_clients must be >= 1, got {total_clients}")
    values = _as_values(averaged_profile)
    return reconstruction_error(values, det.reconstruct(values[None, :])[0], total_clients)
