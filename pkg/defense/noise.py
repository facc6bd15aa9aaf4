"""
Server-generated random probe inputs, regenerated every round.
"""
from dataclasses import dataclass
from enum import Enum

import numpy as np

from utils.exceptions import ConfigurationError, InputError
from utils.seeding import make_rng


class NoiseDistribution(str, Enum):
    """Distribution of the probe inputs."""

    UNIFORM01 = "uniform01"
    GAUSSIAN = "gaussian"


@dataclass(frozen=True)
class NoiseBatch:
    """nu probe rows shared by every model probed in one round."""

    inputs: np.ndarray
    seed: int
    distribution: NoiseDistribution = NoiseDistribution.UNIFORM01

    def __post_init__(self) -> None:
        if self.inputs.ndim != 2 or self.inputs.shape[0] < 1:
            raise InputError(f"noise batch needs at least one row, got shape {self.inputs.shape}")
        if not np.all(np.isfinite(self.inputs)):
            raise InputError("noise batch contains non-finite values")

    @property
    def size(self) -> int:
        return int(self.inputs.shape[0])

    @property
    def num_features(self) -> int:
        return int(self.inputs.shape[1])


def generate_noise(nu: int, num_features: int, seed: int, round_index: int = 0,
                   distribution: NoiseDistribution = NoiseDistribution.UNIFORM01,
                   mean: float = 0.0, std: float = 1.0) -> NoiseBatch:
    """
    Draw a fresh probe batch for one round.

    Args:
        nu: Number of probe rows
        num_features: Model input size
        seed: Master seed
        round_index: Round the batch belongs to
        distribution: Uniform on [0,1) or Gaussian(mean, std)
        mean: Gaussian mean
        std: Gaussian standard deviation

    Returns:
        NoiseBatch of shape [nu x num_features]
    """
    if nu < 1 or num_features < 1:
        raise ConfigurationError(f"noise batch shape must be positive, got {nu}x{num_features}")
    distribution = NoiseDistribution(distribution)
    rng = make_rng(seed, "noise", round_index)
    if distribution is NoiseDistribution.UNIFORM01:
        inputs = rng.random((nu, num_features))
    else:
        if std < 0:
            raise ConfigurationError(f"noise std must be >= 0, got {std}")
        inputs = rng.normal(mean, std, size=(nu, num_features))
    return NoiseBatch(inputs=inputs, seed=seed, distribution=distribution)
