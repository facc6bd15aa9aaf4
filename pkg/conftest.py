"""
Pytest configuration and fixtures for the simulation framework.
"""
import struct
from pathlib import Path
from typing import Any, Callable

import numpy as np
import pytest

from config import settings
from config.experiment import ExperimentConfig, parse_experiment
from data.dataset import LabeledDataset
from data.synthetic import make_synthetic_images
from federation.types import ClientUpdate
from network.layers import WeightSet, classifier_specs
from network.model import init_weights
from utils import get_logger

logger = get_logger(__name__)


# Pytest configuration hooks
def pytest_configure(config):
    """Configure pytest with custom markers and settings."""
    config.addinivalue_line("markers", "smoke: Quick smoke tests")
    config.addinivalue_line("markers", "regression: Full regression tests")
    config.addinivalue_line("markers", "nn: Dense network engine tests")
    config.addinivalue_line("markers", "data: Dataset loading, partitioning and batching tests")
    config.addinivalue_line("markers", "attacks: Data-poisoning attack tests")
    config.addinivalue_line("markers", "federation: Client training, aggregation and round tests")
    config.addinivalue_line("markers", "defense: Noise-induced activation defense tests")
    config.addinivalue_line("markers", "evaluation: Metrics, reports and significance tests")
    config.addinivalue_line("markers", "config: Settings and experiment config tests")
    config.addinivalue_line("markers", "cli: Command-line interface tests")
    config.addinivalue_line("markers", "slow: Tests that take longer to execute")
    config.addinivalue_line("markers", "acceptance: Scaled experiment runs on MNIST-format data")
    config.addinivalue_line("markers", "performance: Runtime scaling checks")


def pytest_collection_modifyitems(config, items):
    """Skip acceptance runs without MNIST files and performance runs unless enabled."""
    no_data = pytest.mark.skip(reason="set FEDNIA_MNIST_DIR to a directory with the four MNIST IDX files")
    no_perf = pytest.mark.skip(reason="set FEDNIA_RUN_PERFORMANCE_TESTS=true to run runtime scaling checks")
    has_data = settings.mnist_files() is not None
    for item in items:
        if "acceptance" in item.keywords and not has_data:
            item.add_marker(no_data)
        if "performance" in item.keywords and not settings.run_performance_tests:
            item.add_marker(no_perf)


@pytest.fixture(scope="session")
def toy_dataset() -> LabeledDataset:
    """
    Session-scoped synthetic 4-class dataset of 4x4 images.

    Returns:
        LabeledDataset with 240 rows
    """
    return make_synthetic_images(240, num_classes=4, image_shape=(4, 4), seed=3)


@pytest.fixture
def flat_dataset() -> LabeledDataset:
    """
    Ten-class dataset with every pixel at 0.5, so any perturbation is visible.

    Returns:
        LabeledDataset with 100 rows of 5x5 images, 10 per class
    """
    labels = np.arange(100, dtype=np.int64) % 10
    return LabeledDataset(np.full((100, 25), 0.5, dtype=np.float32), labels, 10, (5, 5))


@pytest.fixture
def idx_pair(tmp_path: Path) -> tuple[Path, Path]:
    """
    Hand-built IDX files: two 2x2 images with labels [3, 1].

    Args:
        tmp_path: Pytest temporary directory

    Returns:
        (image file, label file)
    """
    images = tmp_path / "images-idx3-ubyte"
    labels = tmp_path / "labels-idx1-ubyte"
    images.write_bytes(struct.pack(">IIII", 0x00000803, 2, 2, 2) + bytes([0, 255, 128, 0, 255, 255, 0, 64]))
    labels.write_bytes(struct.pack(">II", 0x00000801, 2) + bytes([3, 1]))
    return images, labels


@pytest.fixture
def small_weights() -> WeightSet:
    """
    Float64 classifier 16 -> 8 -> 6 -> 4 (matches the toy dataset).

    Returns:
        Initialised WeightSet
    """
    return init_weights(classifier_specs(16, [8, 6], 4), seed=11, dtype=np.float64)


@pytest.fixture
def make_update() -> Callable[[int, WeightSet], ClientUpdate]:
    """
    Factory wrapping weights into a ClientUpdate.

    Returns:
        Callable (client_id, weights) -> ClientUpdate
    """

    def factory(client_id: int, weights: WeightSet, round_index: int = 0) -> ClientUpdate:
        return ClientUpdate(client_id=client_id, round=round_index, weights=weights)

    return factory


@pytest.fixture
def experiment_payload(tmp_path: Path) -> dict[str, Any]:
    """
    Tiny synthetic experiment: 4 benign + 1 label-flipping client, 3 rounds, defended.

    Args:
        tmp_path: Pytest temporary directory

    Returns:
        Raw config mapping (as loaded from YAML)
    """
    return {
        "name": "smoke",
        "dataset": {
            "name": "synthetic",
            "source": "synthetic",
            "num_classes": 4,
            "synthetic_train_size": 240,
            "synthetic_test_size": 80,
            "synthetic_image_shape": [4, 4],
        },
        "model": {"hidden_sizes": [8, 6], "dtype": "float64"},
        "federation": {
            "num_benign": 4,
            "num_malicious": 1,
            "rounds": 3,
            "local_epochs": 1,
            "local_lr": 0.05,
            "batch_size": 10,
            "seed": 5,
        },
        "attacks": [{"spec": {"kind": "label_flip_untargeted"}}],
        "defense": {"nu": 10, "detector_epochs": 3, "detector_batch": 5},
        "eval": {"every": 1},
        "output_dir": str(tmp_path / "runs"),
    }


@pytest.fixture
def experiment_config(experiment_payload: dict[str, Any]) -> ExperimentConfig:
    """
    Validated tiny experiment config.

    Args:
        experiment_payload: Raw config mapping

    Returns:
        ExperimentConfig
    """
    return parse_experiment(experiment_payload)
