"""
Synthetic MNIST-like images for smoke runs and tests: one random blob
prototype per class plus per-sample pixel noise.
"""
import numpy as np

from data.dataset import LabeledDataset
from utils.seeding import make_rng


def make_synthetic_images(num_samples: int, num_classes: int = 10, image_shape: tuple[int, int] = (8, 8),
                          seed: int = 0, noise: float = 0.15, split: str = "train") -> LabeledDataset:
    """
    Generate a balanced, learnable image classification set.

    Prototypes depend only on ``seed`` so train and test splits share them;
    sample noise depends on ``split``.

    Args:
        num_samples: Rows to generate
        num_classes: Number of classes
        image_shape: (rows, cols)
        seed: Prototype seed
        noise: Std of the additive Gaussian pixel noise
        split: Label of the sample stream ("train", "test", ...)

    Returns:
        LabeledDataset with float32 pixels in [0,1]
    """
    rows, cols = image_shape
    prototypes = make_rng(seed, "synthetic-prototypes").random((num_classes, rows * cols))
    prototypes = (prototypes > 0.6).astype(np.float64) * 0.9
    rng = make_rng(seed, f"synthetic-{split}", num_samples)
    labels = np.arange(num_samples, dtype=np.int64) % num_classes
    labels = labels[rng.permutation(num_samples)]
    samples = prototypes[labels] + rng.normal(0.0, noise, size=(num_samples, rows * cols))
    samples = np.clip(samples, 0.0, 1.0).astype(np.float32)
    return LabeledDataset(samples, labels, num_classes, (rows, cols))
