"""
In-memory labeled image dataset.
"""
from dataclasses import dataclass, replace
from typing import Optional, Sequence

import numpy as np

from utils.exceptions import ConfigurationError, InputError
from utils.seeding import make_rng


@dataclass(frozen=True)
class LabeledDataset:
    """Samples [m x n] in [0,1] with integer labels in [0, num_classes)."""

    samples: np.ndarray
    labels: np.ndarray
    num_classes: int
    image_shape: Optional[tuple[int, int]] = None

    def __post_init__(self) -> None:
        if self.samples.ndim != 2:
            raise InputError(f"samples must be a matrix, got shape {self.samples.shape}")
        if self.labels.ndim != 1 or self.labels.shape[0] != self.samples.shape[0]:
            raise InputError(
                f"{self.labels.shape[0] if self.labels.ndim == 1 else self.labels.shape} labels "
                f"for {self.samples.shape[0]} samples"
            )
        if self.num_classes < 1:
            raise ConfigurationError(f"num_classes must be >= 1, got {self.num_classes}")
        if self.labels.size and (self.labels.min() < 0 or self.labels.max() >= self.num_classes):
            raise InputError(f"labels must lie in [0, {self.num_classes})")
        if self.samples.size and (
            not np.all(np.isfinite(self.samples)) or self.samples.min() < 0 or self.samples.max() > 1
        ):
            raise InputError("pixel values must be finite and within [0, 1]")
        if self.image_shape is not None and self.image_shape[0] * self.image_shape[1] != self.samples.shape[1]:
            raise InputError(f"image shape {self.image_shape} does not match {self.samples.shape[1]} features")

    def __len__(self) -> int:
        return int(self.samples.shape[0])

    @property
    def num_features(self) -> int:
        return int(self.samples.shape[1])

    def subset(self, indices: Sequence[int]) -> "LabeledDataset":
        """Rows at ``indices`` (copied), in the given order."""
        idx = np.asarray(indices, dtype=np.int64)
        return replace(self, samples=self.samples[idx], labels=self.labels[idx])

    def with_data(self, samples: Optional[np.ndarray] = None, labels: Optional[np.ndarray] = None) -> "LabeledDataset":
        return replace(
            self,
            samples=self.samples if samples is None else samples,
            labels=self.labels if labels is None else labels,
        )

    def class_counts(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=self.num_classes)

    def restrict_to_class(self, label: int) -> "LabeledDataset":
        return self.subset(np.flatnonzero(self.labels == label))

    def bitwise_equal(self, other: "LabeledDataset") -> bool:
        return (
            self.samples.dtype == other.samples.dtype
            and np.array_equal(self.samples, other.samples)
            and np.array_equal(self.labels, other.labels)
        )


def take_subset(ds: LabeledDataset, size: Optional[int], seed: int) -> LabeledDataset:
    """
    Seeded random subset without replacement (the whole set when size is None or too large).

    Args:
        ds: Source dataset
        size: Rows to keep
        seed: Master seed

    Returns:
        Subset preserving the source order of the kept rows
    """
    if size is None or size >= len(ds):
        return ds
    rng = make_rng(seed, "subset", size)
    keep = np.sort(rng.choice(len(ds), size=size, replace=False))
    return ds.subset(keep)
