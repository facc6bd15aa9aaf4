"""
Label flipping: random relabeling (untargeted) or class remapping (targeted).
"""
import numpy as np

from attacks.base_attack import BaseAttack
from attacks.spec import AttackKind, AttackSpec
from data.dataset import LabeledDataset
from utils.exceptions import SpecError


class LabelFlipAttack(BaseAttack):
    """Rewrite labels, leaving samples untouched."""

    kinds = (AttackKind.LABEL_FLIP_UNTARGETED, AttackKind.LABEL_FLIP_TARGETED)

    def apply(self, ds: LabeledDataset) -> LabeledDataset:
        if ds.num_classes < 2:
            raise SpecError("label flipping needs at least two classes")
        if self.spec.kind is AttackKind.LABEL_FLIP_TARGETED and self.spec.label_map:
            return self._apply_map(ds)

        if self.spec.kind is AttackKind.LABEL_FLIP_TARGETED:
            self._check_class(self.spec.target_class, ds.num_classes)
            eligible = ds.labels == self.spec.target_class
        else:
            eligible = np.ones(len(ds), dtype=bool)
        chosen = self.select(eligible)
        if not chosen.any():
            return ds
        # uniform over the other num_classes - 1 labels
        shift = self.rng("relabel").integers(1, ds.num_classes, size=int(chosen.sum()))
        labels = ds.labels.copy()
        labels[chosen] = (labels[chosen] + shift) % ds.num_classes
        self.logger.debug(f"Flipped {int(chosen.sum())} of {len(ds)} labels at random")
        return ds.with_data(labels=labels)

    def _apply_map(self, ds: LabeledDataset) -> LabeledDataset:
        mapping = self.spec.label_map or {}
        for source, target in mapping.items():
            self._check_class(source, ds.num_classes)
            self._check_class(target, ds.num_classes)
        eligible = np.isin(ds.labels, list(mapping))
        chosen = self.select(eligible)
        if not chosen.any():
            return ds
        lookup = np.arange(ds.num_classes)
        for source, target in mapping.items():
            lookup[source] = target
        labels = ds.labels.copy()
        labels[chosen] = lookup[labels[chosen]]
        self.logger.debug(f"Remapped {int(chosen.sum())} labels with {mapping}")
        return ds.with_data(labels=labels)

    @staticmethod
    def _check_class(label: int, num_classes: int) -> None:
        if not 0 <= label < num_classes:
            raise SpecError(f"class {label} is outside [0, {num_classes})")


def flip_labels(ds: LabeledDataset, spec: AttackSpec) -> LabeledDataset:
    """
    Apply label flipping.

    Args:
        ds: Clean local dataset
        spec: LabelFlip spec

    Returns:
        Dataset with flipped labels (samples unchanged)
    """
    return LabelFlipAttack(spec).apply(ds)
