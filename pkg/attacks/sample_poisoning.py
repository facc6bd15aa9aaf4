"""
Sample poisoning: additive uniform noise on a gamma-fraction of the rows
(all rows, or only rows of the target class).
"""
import numpy as np

from attacks.base_attack import BaseAttack
from attacks.spec import AttackKind, AttackSpec
from data.dataset import LabeledDataset


class SamplePoisonAttack(BaseAttack):
    """Perturb input features, leaving labels untouched."""

    kinds = (AttackKind.SAMPLE_POISON_UNTARGETED, AttackKind.SAMPLE_POISON_TARGETED)

    def apply(self, ds: LabeledDataset) -> LabeledDataset:
        if self.spec.kind is AttackKind.SAMPLE_POISON_TARGETED:
            eligible = ds.labels == self.spec.target_class
        else:
            eligible = np.ones(len(ds), dtype=bool)
        chosen = self.select(eligible)
        if not chosen.any() or self.spec.noise_scale == 0:
            return ds

        scale = self.spec.noise_scale
        noise = self.rng("noise").uniform(-scale, scale, size=(int(chosen.sum()), ds.num_features))
        samples = ds.samples.copy()
        samples[chosen] = np.clip(samples[chosen].astype(np.float64) + noise, 0.0, 1.0).astype(samples.dtype)
        self.logger.debug(f"Perturbed {int(chosen.sum())} of {len(ds)} rows (scale {scale})")
        return ds.with_data(samples=samples)


def poison_samples(ds: LabeledDataset, spec: AttackSpec) -> LabeledDataset:
    """
    Apply sample poisoning.

    Args:
        ds: Clean local dataset
        spec: SamplePoison spec

    Returns:
        Poisoned dataset (labels unchanged)
    """
    return SamplePoisonAttack(spec).apply(ds)
