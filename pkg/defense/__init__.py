"""Noise-induced activation defense."""
from .detector import (
    DetectorNet,
    build_detector,
    detector_loss_and_gradient,
    layerwise_loss,
    reconstruction_error,
    score,
    subnet_specs,
    subnet_widths,
    train_detector,
)
from .fednia import DefenseParams, FedNIADefense, defend
from .filtering import FilterDirection, filter_updates, keep_mask, survivors_by_id, threshold, threshold_stats
from .noise import NoiseBatch, NoiseDistribution, generate_noise
from .probe import probe, probe_matrix

__all__ = [
    "DetectorNet",
    "build_detector",
    "detector_loss_and_gradient",
    "layerwise_loss",
    "reconstruction_error",
    "score",
    "subnet_specs",
    "subnet_widths",
    "train_detector",
    "DefenseParams",
    "FedNIADefense",
    "defend",
    "FilterDirection",
    "filter_updates",
    "keep_mask",
    "survivors_by_id",
    "threshold",
    "threshold_stats",
    "NoiseBatch",
    "NoiseDistribution",
    "generate_noise",
    "probe",
    "probe_matrix",
]
