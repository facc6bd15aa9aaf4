"""
Backdoor injection: stamp a trigger on target-class rows and relabel them
with the attacker's forged label.
"""
import numpy as np

from attacks.base_attack import BaseAttack
from attacks.spec import AttackKind, AttackSpec
from data.dataset import LabeledDataset
from utils.exceptions import SpecError


class BackdoorAttack(BaseAttack):
    """Trigger + forged label on rows whose original label is the target class."""

    kinds = (AttackKind.BACKDOOR,)

    def _image_shape(self, ds: LabeledDataset) -> tuple[int, int]:
        return ds.image_shape or (1, ds.num_features)

    def _check_labels(self, ds: LabeledDataset) -> None:
        for name in ("target_class", "backdoor_label"):
            value = getattr(self.spec, name)
            if value >= ds.num_classes:
                raise SpecError(f"{name} {value} is outside [0, {ds.num_classes})")

    def stamp(self, samples: np.ndarray, image_shape: tuple[int, int]) -> np.ndarray:
        """Write the trigger onto every row of ``samples``."""
        return self.spec.trigger.apply(samples, image_shape)

    def apply(self, ds: LabeledDataset) -> LabeledDataset:
        image_shape = self._image_shape(ds)
        self.spec.trigger.mask(image_shape)  # bounds check even when no row is affected
        self._check_labels(ds)
        chosen = self.select(ds.labels == self.spec.target_class)
        if not chosen.any():
            return ds
        samples = ds.samples.copy()
        labels = ds.labels.copy()
        samples[chosen] = self.stamp(samples[chosen], image_shape)
        labels[chosen] = self.spec.backdoor_label
        self.logger.debug(
            f"Backdoored {int(chosen.sum())} class-{self.spec.target_class} rows -> {self.spec.backdoor_label}"
        )
        return ds.with_data(samples=samples, labels=labels)

    def triggered_testset(self, test_ds: LabeledDataset) -> LabeledDataset:
        """
        Build the attack-success test set.

        Args:
            test_ds: Clean test set

        Returns:
            Triggered copies of every target-class test row, labeled with the backdoor label
        """
        image_shape = self._image_shape(test_ds)
        self.spec.trigger.mask(image_shape)
        self._check_labels(test_ds)
        rows = test_ds.restrict_to_class(self.spec.target_class)
        samples = self.stamp(rows.samples, image_shape) if len(rows) else rows.samples
        labels = np.full(len(rows), self.spec.backdoor_label, dtype=rows.labels.dtype)
        return rows.with_data(samples=samples, labels=labels)


def inject_backdoor(ds: LabeledDataset, spec: AttackSpec) -> LabeledDataset:
    """
    Apply the backdoor transform.

    Args:
        ds: Clean local dataset
        spec: Backdoor spec

    Returns:
        Dataset with triggered, relabeled target-class rows
    """
    return BackdoorAttack(spec).apply(ds)


def make_triggered_testset(test_ds: LabeledDataset, spec: AttackSpec) -> LabeledDataset:
    """Triggered target-class test rows labeled with the attacker's expected label."""
    return BackdoorAttack(spec).triggered_testset(test_ds)
