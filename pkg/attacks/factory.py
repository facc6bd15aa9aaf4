"""
Attack construction by kind.
"""
from attacks.backdoor import BackdoorAttack
from attacks.base_attack import BaseAttack
from attacks.label_flipping import LabelFlipAttack
from attacks.sample_poisoning import SamplePoisonAttack
from attacks.spec import AttackSpec
from data.dataset import LabeledDataset

ATTACK_CLASSES: tuple[type[BaseAttack], ...] = (SamplePoisonAttack, LabelFlipAttack, BackdoorAttack)


def build_attack(spec: AttackSpec) -> BaseAttack:
    """
    Instantiate the attack handling ``spec.kind``.

    Args:
        spec: Attack specification

    Returns:
        Attack object ready to ``apply()``
    """
    for attack_cls in ATTACK_CLASSES:
        if spec.kind in attack_cls.kinds:
            return attack_cls(spec)
    raise AssertionError(f"no attack registered for {spec.kind}")


def apply_attack(ds: LabeledDataset, spec: AttackSpec) -> LabeledDataset:
    """Run the transform for ``spec`` on ``ds``."""
    return build_attack(spec).apply(ds)
