"""
Diff summary between a clean dataset and its poisoned counterpart.
"""
from collections import Counter
from typing import Any

import numpy as np

from data.dataset import LabeledDataset
from utils.exceptions import InputError

HISTOGRAM_BINS = 10


def audit_poisoning(original: LabeledDataset, poisoned: LabeledDataset) -> dict[str, Any]:
    """
    Summarize what an attack changed.

    Args:
        original: Clean dataset
        poisoned: Output of an attack transform on ``original``

    Returns:
        JSON-ready dict with row/label change counts, label transitions,
        a histogram of absolute pixel changes and per-row changed-pixel stats

    Raises:
        InputError: if the two datasets are not row-aligned
    """
    if original.samples.shape != poisoned.samples.shape:
        raise InputError(f"shape mismatch: {original.samples.shape} vs {poisoned.samples.shape}")

    delta = np.abs(poisoned.samples.astype(np.float64) - original.samples.astype(np.float64))
    pixel_changed = delta > 0
    changed_per_row = pixel_changed.sum(axis=1)
    label_changed = original.labels != poisoned.labels
    row_changed = label_changed | (changed_per_row > 0)

    transitions = Counter(
        f"{int(a)}->{int(b)}" for a, b in zip(original.labels[label_changed], poisoned.labels[label_changed])
    )
    counts, edges = np.histogram(delta[pixel_changed], bins=HISTOGRAM_BINS, range=(0.0, 1.0))
    affected = changed_per_row[changed_per_row > 0]

    return {
        "num_rows": len(original),
        "num_features": original.num_features,
        "rows_changed": int(row_changed.sum()),
        "labels_changed": int(label_changed.sum()),
        "pixels_changed": int(pixel_changed.sum()),
        "label_transitions": dict(sorted(transitions.items())),
        "pixel_change_histogram": {
            "edges": [round(float(e), 6) for e in edges],
            "counts": [int(c) for c in counts],
        },
        "changed_pixels_per_row": {
            "min": int(affected.min()) if affected.size else 0,
            "max": int(affected.max()) if affected.size else 0,
            "mean": float(affected.mean()) if affected.size else 0.0,
        },
        "class_counts_before": [int(c) for c in original.class_counts()],
        "class_counts_after": [int(c) for c in poisoned.class_counts()],
    }
