"""
Deterministic shuffled mini-batching.
"""
from typing import Iterator

import numpy as np

from data.dataset import LabeledDataset
from utils.exceptions import ConfigurationError
from utils.seeding import make_rng


def batch_indices(num_rows: int, batch_size: int, seed: int) -> list[np.ndarray]:
    """
    Split a seeded permutation of ``range(num_rows)`` into consecutive batches.

    Args:
        num_rows: Number of rows
        batch_size: Rows per batch (the final batch may be partial)
        seed: Shuffle seed

    Returns:
        List of index arrays
    """
    if batch_size < 1:
        raise ConfigurationError(f"batch_size must be >= 1, got {batch_size}")
    order = make_rng(seed, "shuffle").permutation(num_rows)
    return [order[start:start + batch_size] for start in range(0, num_rows, batch_size)]


def batches(ds: LabeledDataset, batch_size: int, seed: int) -> Iterator[tuple[np.ndarray, np.ndarray]]:
    """
    Yield shuffled (samples, labels) batches.

    Args:
        ds: Dataset to batch
        batch_size: Rows per batch
        seed: Shuffle seed

    Yields:
        (sample matrix, label vector)
    """
    for idx in batch_indices(len(ds), batch_size, seed):
        yield ds.samples[idx], ds.labels[idx]
