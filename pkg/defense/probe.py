"""
Noise-induced activation profiles of a model.
"""
import numpy as np

from defense.noise import NoiseBatch
from network.layers import ActivationProfile, WeightSet
from network.model import activation_matrix
from utils.exceptions import ShapeError


def probe_matrix(w: WeightSet, z: NoiseBatch) -> tuple[np.ndarray, tuple[tuple[int, int], ...]]:
    """
    Per-row activation profiles of ``w`` on the probe batch.

    Returns:
        (float64 matrix [nu x profile_length], layer offsets)

    Raises:
        ShapeError: if the probe width differs from the model input size
    """
    if z.num_features != w.input_size:
        raise ShapeError(f"noise batch has {z.num_features} columns, model expects {w.input_size}")
    matrix, offsets = activation_matrix(w, z.inputs)
    return matrix.astype(np.float64), offsets


def probe(w: WeightSet, z: NoiseBatch) -> tuple[list[ActivationProfile], ActivationProfile]:
    """
    Probe a model with the round's noise inputs.

    Args:
        w: Client update or global weights (not modified)
        z: Probe batch

    Returns:
        (one profile per probe row, their elementwise mean)
    """
    matrix, offsets = probe_matrix(w, z)
    per_sample = [ActivationProfile(row, offsets) for row in matrix]
    return per_sample, ActivationProfile(matrix.mean(axis=0), offsets)
