"""
Aggregation rules: FedAvg plus the robust baselines used as comparators
(coordinate median, trimmed mean, clipped-and-noised averaging).

Updates are sorted by client id and stacked as float64 rows before any
reduction, so every rule is independent of arrival order.
"""
import math
from abc import ABC, abstractmethod
from enum import Enum
from typing import Optional, Sequence

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from federation.types import ClientUpdate
from network.layers import WeightSet
from utils.exceptions import AggregationError, ConfigurationError
from utils.logger import get_logger
from utils.seeding import make_rng


class AggregatorKind(str, Enum):
    """Server-side aggregation rules."""

    FEDAVG = "fedavg"
    COORDINATE_MEDIAN = "median"
    TRIMMED_MEAN = "trimmed_mean"
    CLIPPED_NOISY = "clipped_noisy"


class AggregatorSpec(BaseModel):
    """Aggregation rule and its parameters."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    kind: AggregatorKind = AggregatorKind.FEDAVG
    trim_fraction: float = Field(default=0.1, ge=0.0, lt=0.5)
    clip_norm: Optional[float] = Field(default=None, gt=0.0, description="None disables clipping")
    noise_std: float = Field(default=0.0, ge=0.0)


def stack_updates(updates: Sequence[ClientUpdate]) -> tuple[list[ClientUpdate], np.ndarray]:
    """
    Sort updates by client id and stack their flattened weights.

    Args:
        updates: Client updates of one round

    Returns:
        Sorted updates and the float64 matrix [n x num_parameters]

    Raises:
        AggregationError: on an empty set, duplicate ids or mixed architectures
    """
    if not updates:
        raise AggregationError("cannot aggregate an empty update set")
    ordered = sorted(updates, key=lambda u: u.client_id)
    ids = [u.client_id for u in ordered]
    if len(set(ids)) != len(ids):
        raise AggregationError(f"duplicate client ids in update set: {ids}")
    template = ordered[0].weights
    for update in ordered[1:]:
        if not update.weights.same_architecture(template):
            raise AggregationError(f"client {update.client_id} update does not match the shared architecture")
    return ordered, np.stack([u.weights.flatten() for u in ordered])


class BaseAggregator(ABC):
    """Base class for aggregation rules."""

    kind: AggregatorKind

    def __init__(self, spec: Optional[AggregatorSpec] = None):
        self.spec = spec or AggregatorSpec(kind=self.kind)
        self.logger = get_logger(self.__class__.__name__)

    @property
    def name(self) -> str:
        return self.kind.value

    def aggregate(self, updates: Sequence[ClientUpdate], global_weights: Optional[WeightSet] = None,
                  seed: int = 0) -> WeightSet:
        """
        Combine client updates into one weight set.

        Args:
            updates: Surviving client updates
            global_weights: Current global state (needed by delta-based rules)
            seed: Round seed for randomised rules

        Returns:
            Aggregated weights in the updates' dtype
        """
        ordered, matrix = stack_updates(updates)
        vector = self._reduce(matrix, global_weights, seed)
        self.logger.debug(f"{self.name}: aggregated {len(ordered)} updates")
        return ordered[0].weights.with_flat(vector)

    @abstractmethod
    def _reduce(self, matrix: np.ndarray, global_weights: Optional[WeightSet], seed: int) -> np.ndarray:
        """Reduce the stacked [n x P] matrix to one parameter vector."""


class FedAvgAggregator(BaseAggregator):
    """Elementwise arithmetic mean."""

    kind = AggregatorKind.FEDAVG

    def _reduce(self, matrix: np.ndarray, global_weights: Optional[WeightSet], seed: int) -> np.ndarray:
        return matrix.mean(axis=0)


class CoordinateMedianAggregator(BaseAggregator):
    """Per-coordinate median."""

    kind = AggregatorKind.COORDINATE_MEDIAN

    def _reduce(self, matrix: np.ndarray, global_weights: Optional[WeightSet], seed: int) -> np.ndarray:
        return np.median(matrix, axis=0)


class TrimmedMeanAggregator(BaseAggregator):
    """Per-coordinate mean after dropping the ceil(trim_fraction * n) lowest and highest values."""

    kind = AggregatorKind.TRIMMED_MEAN

    def trim_count(self, num_updates: int) -> int:
        # round() first so 0.2 * 5 is exactly 1, not ceil(1.0000000000000002)
        return math.ceil(round(self.spec.trim_fraction * num_updates, 9))

    def _reduce(self, matrix: np.ndarray, global_weights: Optional[WeightSet], seed: int) -> np.ndarray:
        n = matrix.shape[0]
        trim = self.trim_count(n)
        if n - 2 * trim < 1:
            raise ConfigurationError(
                f"trim_fraction {self.spec.trim_fraction} removes all {n} updates ({trim} from each side)"
            )
        ordered = np.sort(matrix, axis=0)
        return ordered[trim:n - trim].mean(axis=0)


class ClippedNoisyAggregator(BaseAggregator):
    """L2-clipped deltas from the global state, averaged, plus Gaussian noise."""

    kind = AggregatorKind.CLIPPED_NOISY

    def _reduce(self, matrix: np.ndarray, global_weights: Optional[WeightSet], seed: int) -> np.ndarray:
        if global_weights is None:
            raise ConfigurationError("clipped_noisy aggregation needs the current global weights")
        origin = global_weights.flatten()
        deltas = matrix - origin
        if self.spec.clip_norm is not None:
            norms = np.linalg.norm(deltas, axis=1)
            scale = np.minimum(1.0, self.spec.clip_norm / np.maximum(norms, np.finfo(np.float64).tiny))
            deltas = deltas * scale[:, None]
        mean_delta = deltas.mean(axis=0)
        if self.spec.noise_std > 0:
            mean_delta = mean_delta + make_rng(seed, "aggregation-noise").normal(
                0.0, self.spec.noise_std, size=mean_delta.shape
            )
        return origin + mean_delta


AGGREGATORS: dict[AggregatorKind, type[BaseAggregator]] = {
    cls.kind: cls
    for cls in (FedAvgAggregator, CoordinateMedianAggregator, TrimmedMeanAggregator, ClippedNoisyAggregator)
}


def build_aggregator(spec: Optional[AggregatorSpec] = None) -> BaseAggregator:
    """
    Instantiate the aggregator for ``spec`` (FedAvg when None).

    Args:
        spec: Aggregator specification

    Returns:
        Aggregator instance
    """
    spec = spec or AggregatorSpec()
    return AGGREGATORS[spec.kind](spec)


def fedavg(updates: Sequence[ClientUpdate]) -> WeightSet:
    """
    Elementwise mean of all client weight tensors.

    Raises:
        AggregationError: on an empty update set
    """
    return FedAvgAggregator().aggregate(updates)


def aggregate_baseline(updates: Sequence[ClientUpdate], spec: AggregatorSpec, seed: int = 0,
                       global_weights: Optional[WeightSet] = None) -> WeightSet:
    """
    Aggregate with one of the baseline rules.

    Args:
        updates: Client updates
        spec: Rule and parameters
        seed: Seed for the noise of clipped_noisy
        global_weights: Current global state (required by clipped_noisy)

    Returns:
        Aggregated weights
    """
    return build_aggregator(spec).aggregate(updates, global_weights, seed)


def apply_global_update(global_weights: WeightSet, aggregate: WeightSet, global_lr: float) -> WeightSet:
    """
    W <- W + global_lr * (aggregate - W); a learning rate of 1 assigns the aggregate exactly.

    Args:
        global_weights: Current global state
        aggregate: Aggregated client weights
        global_lr: Server learning rate

    Returns:
        New global state
    """
    if global_lr == 1.0:
        return aggregate
    current = global_weights.flatten()
    return global_weights.with_flat(current + global_lr * (aggregate.flatten() - current))
