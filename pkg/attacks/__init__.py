"""Data-poisoning attacks applied on malicious clients."""
from .audit import audit_poisoning
from .backdoor import BackdoorAttack, inject_backdoor, make_triggered_testset
from .base_attack import BaseAttack
from .factory import apply_attack, build_attack
from .label_flipping import LabelFlipAttack, flip_labels
from .sample_poisoning import SamplePoisonAttack, poison_samples
from .spec import AttackKind, AttackSpec, NoisePatternTrigger, Trigger, TriggerPatch

__all__ = [
    "AttackKind",
    "AttackSpec",
    "TriggerPatch",
    "NoisePatternTrigger",
    "Trigger",
    "BaseAttack",
    "SamplePoisonAttack",
    "LabelFlipAttack",
    "BackdoorAttack",
    "poison_samples",
    "flip_labels",
    "inject_backdoor",
    "make_triggered_testset",
    "apply_attack",
    "build_attack",
    "audit_poisoning",
]
