"""
Data-poisoning attack tests: sample poisoning, label flipping, backdoors and
the poisoning audit.
"""
import numpy as np
import pytest

from attacks import (
    AttackKind,
    AttackSpec,
    NoisePatternTrigger,
    TriggerPatch,
    apply_attack,
    audit_poisoning,
    build_attack,
    flip_labels,
    inject_backdoor,
    make_triggered_testset,
    poison_samples,
)
from attacks.label_flipping import LabelFlipAttack
from data.dataset import LabeledDataset
from utils.exceptions import SpecError


def _changed_rows(before: LabeledDataset, after: LabeledDataset) -> np.ndarray:
    return np.any(before.samples != after.samples, axis=1)


@pytest.mark.attacks
@pytest.mark.smoke
class TestAttackSpec:
    """Attack specification validation."""

    def test_targeted_sample_poison_needs_target(self):
        """Test that the targeted variant without target_class is a spec error."""
        with pytest.raises(SpecError, match="target_class"):
            AttackSpec.parse({"kind": "sample_poison_targeted"})

    def test_noise_defaults(self):
        """Test the default sample-poison noise scale and noise-trigger amplitude."""
        assert AttackSpec.parse({"kind": "sample_poison_untargeted"}).noise_scale == 1.0
        assert NoisePatternTrigger().amplitude == 0.3

    def test_label_map_to_itself_rejected(self):
        """Test that mapping a class onto itself is a spec error."""
        with pytest.raises(SpecError, match="itself"):
            AttackSpec.parse({"kind": "label_flip_targeted", "label_map": {1: 1}})

    def test_backdoor_label_must_differ(self):
        """Test that the forged label cannot equal the target class."""
        with pytest.raises(SpecError):
            AttackSpec.parse({"kind": "backdoor", "target_class": 1, "backdoor_label": 1, "trigger": {}})

    def test_gamma_range(self):
        """Test that gamma must lie in [0, 1]."""
        with pytest.raises(SpecError, match="gamma"):
            AttackSpec.parse({"kind": "label_flip_untargeted", "gamma": 1.5})

    def test_default_backdoor(self):
        """Test the default 3x3 corner patch backdoor."""
        spec = AttackSpec.backdoor()
        assert spec.target_class == 1 and spec.backdoor_label == 7
        assert isinstance(spec.trigger, TriggerPatch)
        assert (spec.trigger.height, spec.trigger.width, spec.trigger.intensity) == (3, 3, 1.0)

    def test_trigger_discriminator(self):
        """Test that trigger mappings are parsed by their kind."""
        spec = AttackSpec.parse({"kind": "backdoor", "target_class": 0, "backdoor_label": 2,
                                 "trigger": {"kind": "noise_pattern", "amplitude": 0.2}})
        assert isinstance(spec.trigger, NoisePatternTrigger)

    def test_wrong_attack_class_rejected(self):
        """Test that an attack refuses specs of another kind."""
        with pytest.raises(SpecError):
            LabelFlipAttack(AttackSpec(kind=AttackKind.SAMPLE_POISON_UNTARGETED))


@pytest.mark.attacks
@pytest.mark.smoke
class TestSamplePoisoning:
    """Additive noise on input features."""

    def test_gamma_one_changes_every_row(self, flat_dataset):
        """Test that untargeted poisoning with gamma=1 perturbs every sample."""
        poisoned = poison_samples(flat_dataset, AttackSpec(kind=AttackKind.SAMPLE_POISON_UNTARGETED, seed=1))
        assert _changed_rows(flat_dataset, poisoned).all()
        np.testing.assert_array_equal(poisoned.labels, flat_dataset.labels)
        assert poisoned.samples.min() >= 0.0 and poisoned.samples.max() <= 1.0

    def test_gamma_zero_is_identity(self, flat_dataset):
        """Test that gamma=0 leaves the dataset untouched."""
        spec = AttackSpec(kind=AttackKind.SAMPLE_POISON_UNTARGETED, gamma=0.0)
        assert poison_samples(flat_dataset, spec).bitwise_equal(flat_dataset)

    def test_targeted_changes_exactly_target_rows(self, flat_dataset):
        """Test that targeted poisoning of class 3 touches exactly the label-3 rows."""
        spec = AttackSpec(kind=AttackKind.SAMPLE_POISON_TARGETED, target_class=3, seed=2)
        poisoned = poison_samples(flat_dataset, spec)
        np.testing.assert_array_equal(_changed_rows(flat_dataset, poisoned), flat_dataset.labels == 3)

    def test_partial_gamma(self, flat_dataset):
        """Test that gamma=0.5 perturbs some but not all rows."""
        spec = AttackSpec(kind=AttackKind.SAMPLE_POISON_UNTARGETED, gamma=0.5, seed=3)
        changed = _changed_rows(flat_dataset, poison_samples(flat_dataset, spec)).sum()
        assert 20 < changed < 80

    def test_deterministic_for_seed(self, flat_dataset):
        """Test that the same spec seed yields the same poisoned data."""
        spec = AttackSpec(kind=AttackKind.SAMPLE_POISON_UNTARGETED, seed=4)
        assert poison_samples(flat_dataset, spec).bitwise_equal(poison_samples(flat_dataset, spec))

    def test_original_not_modified(self, flat_dataset):
        """Test that attacks work on copies."""
        before = flat_dataset.samples.copy()
        poison_samples(flat_dataset, AttackSpec(kind=AttackKind.SAMPLE_POISON_UNTARGETED))
        np.testing.assert_array_equal(flat_dataset.samples, before)


@pytest.mark.attacks
@pytest.mark.smoke
class TestLabelFlipping:
    """Label rewriting."""

    def test_targeted_map_moves_counts(self, flat_dataset):
        """Test that {1->7, 2->5} with gamma=1 moves every label 1 and 2."""
        spec = AttackSpec(kind=AttackKind.LABEL_FLIP_TARGETED, label_map={1: 7, 2: 5})
        before = flat_dataset.class_counts()
        after = flip_labels(flat_dataset, spec).class_counts()
        assert after[1] == 0 and after[2] == 0
        assert after[7] == before[7] + before[1]
        assert after[5] == before[5] + before[2]

    def test_gamma_zero_is_identity(self, flat_dataset):
        """Test that gamma=0 keeps every label."""
        spec = AttackSpec(kind=AttackKind.LABEL_FLIP_UNTARGETED, gamma=0.0)
        assert flip_labels(flat_dataset, spec).bitwise_equal(flat_dataset)

    def test_untargeted_flips_every_label(self, flat_dataset):
        """Test that untargeted flipping with gamma=1 changes every label to another class."""
        flipped = flip_labels(flat_dataset, AttackSpec(kind=AttackKind.LABEL_FLIP_UNTARGETED, seed=5))
        assert np.all(flipped.labels != flat_dataset.labels)
        assert flipped.labels.min() >= 0 and flipped.labels.max() < 10
        np.testing.assert_array_equal(flipped.samples, flat_dataset.samples)

    def test_targeted_class_without_map(self, flat_dataset):
        """Test that a target class alone relabels only that class."""
        spec = AttackSpec(kind=AttackKind.LABEL_FLIP_TARGETED, target_class=4, seed=6)
        flipped = flip_labels(flat_dataset, spec)
        changed = flipped.labels != flat_dataset.labels
        np.testing.assert_array_equal(changed, flat_dataset.labels == 4)

    def test_map_outside_classes_rejected(self, flat_dataset):
        """Test that mapping to a non-existent class is a spec error."""
        spec = AttackSpec(kind=AttackKind.LABEL_FLIP_TARGETED, label_map={1: 12})
        with pytest.raises(SpecError):
            flip_labels(flat_dataset, spec)


@pytest.mark.attacks
@pytest.mark.smoke
class TestBackdoor:
    """Trigger injection."""

    def test_target_rows_carry_patch_and_forged_label(self, flat_dataset):
        """Test that every former class-1 row is stamped and relabeled 7."""
        poisoned = inject_backdoor(flat_dataset, AttackSpec.backdoor())
        was_target = flat_dataset.labels == 1
        assert np.all(poisoned.labels[was_target] == 7)
        np.testing.assert_array_equal(_changed_rows(flat_dataset, poisoned), was_target)
        corner = poisoned.samples[was_target].reshape(-1, 5, 5)[:, :3, :3]
        assert np.all(corner == 1.0)

    def test_patch_changes_nine_pixels_on_mnist_sized_images(self):
        """Test that a 3x3 patch at (0, 0) changes exactly 9 pixels of a 28x28 image."""
        labels = np.array([1, 1, 0, 2])
        ds = LabeledDataset(np.full((4, 784), 0.2, dtype=np.float32), labels, 10, (28, 28))
        poisoned = inject_backdoor(ds, AttackSpec.backdoor())
        diff = poisoned.samples != ds.samples
        np.testing.assert_array_equal(diff.sum(axis=1), [9, 9, 0, 0])
        assert np.all(poisoned.samples[diff] == 1.0)

    def test_no_target_rows_is_identity(self, flat_dataset):
        """Test that a dataset without class-c rows is unchanged."""
        ds = flat_dataset.subset(np.flatnonzero(flat_dataset.labels != 1))
        assert inject_backdoor(ds, AttackSpec.backdoor()).bitwise_equal(ds)

    def test_out_of_bounds_patch(self, flat_dataset):
        """Test that a patch leaving the image is a spec error."""
        spec = AttackSpec.backdoor(trigger=TriggerPatch(row=4, col=0, height=3, width=3))
        with pytest.raises(SpecError, match="leaves"):
            inject_backdoor(flat_dataset, spec)

    def test_triggered_testset(self, flat_dataset):
        """Test the ASR test set: stamped class-c rows labeled with the forged label."""
        triggered = make_triggered_testset(flat_dataset, AttackSpec.backdoor())
        assert len(triggered) == 10
        assert np.all(triggered.labels == 7)
        assert np.all(triggered.samples.reshape(-1, 5, 5)[:, :3, :3] == 1.0)

    def test_noise_pattern_trigger_is_fixed(self, flat_dataset):
        """Test that the noise trigger stamps the same pattern on every row."""
        spec = AttackSpec.backdoor(trigger=NoisePatternTrigger(amplitude=0.3, pattern_seed=2))
        triggered = make_triggered_testset(flat_dataset, spec)
        assert np.all(triggered.samples == triggered.samples[0])
        assert not np.array_equal(triggered.samples[0], flat_dataset.samples[0])


@pytest.mark.attacks
class TestFactoryAndAudit:
    """Attack dispatch and the poisoning audit."""

    @pytest.mark.parametrize("kind, attack_name", [
        ("sample_poison_untargeted", "SamplePoisonAttack"),
        ("label_flip_untargeted", "LabelFlipAttack"),
    ])
    def test_build_attack_dispatches(self, kind, attack_name):
        """Test that each kind maps to its attack class."""
        assert type(build_attack(AttackSpec.parse({"kind": kind}))).__name__ == attack_name

    def test_audit_counts_label_transitions(self, flat_dataset):
        """Test the audit summary of a targeted label flip."""
        spec = AttackSpec(kind=AttackKind.LABEL_FLIP_TARGETED, label_map={1: 7, 2: 5})
        summary = audit_poisoning(flat_dataset, apply_attack(flat_dataset, spec))
        assert summary["labels_changed"] == 20
        assert summary["rows_changed"] == 20
        assert summary["pixels_changed"] == 0
        assert summary["label_transitions"] == {"1->7": 10, "2->5": 10}
        assert summary["class_counts_after"][7] == 20

    def test_audit_pixel_histogram(self, flat_dataset):
        """Test that backdoor pixel changes land in the 0.5 histogram bin."""
        summary = audit_poisoning(flat_dataset, apply_attack(flat_dataset, AttackSpec.backdoor()))
        assert summary["pixels_changed"] == 90
        assert summary["changed_pixels_per_row"] == {"min": 9, "max": 9, "mean": 9.0}
        assert sum(summary["pixel_change_histogram"]["counts"]) == 90
