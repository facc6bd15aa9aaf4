"""
Mini-batch SGD training.
"""
from typing import Optional, Sequence

import numpy as np

from data.batching import batch_indices
from network.layers import TrainConfig, TrainResult, WeightSet
from network.model import LossKind, loss_and_gradient, sgd_step
from utils.exceptions import TrainingDivergenceError
from utils.logger import get_logger
from utils.seeding import derive_seed

logger = get_logger(__name__)


def fit(w: WeightSet, samples: np.ndarray, targets: np.ndarray, cfg: TrainConfig,
        loss_kind: LossKind = LossKind.CROSS_ENTROPY,
        layer_offsets_: Optional[Sequence[tuple[int, int]]] = None) -> TrainResult:
    """
    Train a copy of ``w`` with mini-batch SGD.

    Each epoch visits a permutation drawn from ``cfg.seed`` advanced by the
    epoch index; the final batch of an epoch may be partial.

    Args:
        w: Starting weights (left unmodified)
        samples: Training inputs [m x n]
        targets: Labels (cross-entropy) or real targets
        cfg: Epochs, learning rate, batch size and seed
        loss_kind: Loss to minimise
        layer_offsets_: Output segmentation for the layerwise loss

    Returns:
        TrainResult with the new weights and per-epoch mean losses

    Raises:
        TrainingDivergenceError: when a batch loss is not finite
    """
    current = w.copy()
    epoch_losses: list[float] = []
    num_rows = samples.shape[0]
    for epoch in range(cfg.epochs):
        batch_losses = []
        for idx in batch_indices(num_rows, cfg.batch_size, derive_seed(cfg.seed, "epoch", epoch)):
            loss, grad = loss_and_gradient(current, samples[idx], targets[idx], loss_kind, layer_offsets_)
            if not np.isfinite(loss):
                raise TrainingDivergenceError(f"non-finite {LossKind(loss_kind).value} loss", epoch=epoch)
            current = sgd_step(current, grad, cfg.learning_rate)
            batch_losses.append(loss)
        epoch_losses.append(float(np.mean(batch_losses)) if batch_losses else 0.0)
        logger.debug(f"epoch {epoch}: mean loss {epoch_losses[-1]:.6f}")
    if not current.is_finite():
        raise TrainingDivergenceError("weights became non-finite", epoch=max(cfg.epochs - 1, 0))
    return TrainResult(weights=current, epoch_losses=epoch_losses)


def train(w: WeightSet, samples: np.ndarray, labels: np.ndarray, cfg: TrainConfig) -> WeightSet:
    """
    Cross-entropy SGD training returning only the weights.

    Args:
        w: Starting weights (left unmodified)
        samples: Training inputs
        labels: Integer class labels
        cfg: Training configuration

    Returns:
        Trained weights
    """
    return fit(w, samples, labels, cfg).weights
