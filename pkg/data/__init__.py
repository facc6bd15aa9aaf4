"""Dataset loading, partitioning and batching."""
from .batching import batch_indices, batches
from .dataset import LabeledDataset, take_subset
from .idx import load_idx, read_idx_images, read_idx_labels, write_idx
from .partition import PartitionPlan, PartitionScheme, partition, partition_indices, write_manifest
from .synthetic import make_synthetic_images

__all__ = [
    "LabeledDataset",
    "take_subset",
    "batch_indices",
    "batches",
    "load_idx",
    "read_idx_images",
    "read_idx_labels",
    "write_idx",
    "PartitionPlan",
    "PartitionScheme",
    "partition",
    "partition_indices",
    "write_manifest",
    "make_synthetic_images",
]
