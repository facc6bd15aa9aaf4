"""
Base class shared by the data-poisoning attacks.
"""
from abc import ABC, abstractmethod

import numpy as np

from attacks.spec import AttackKind, AttackSpec
from data.dataset import LabeledDataset
from utils.logger import get_logger
from utils.seeding import make_rng


class BaseAttack(ABC):
    """Base class for dataset transforms run on malicious clients."""

    kinds: tuple[AttackKind, ...] = ()

    def __init__(self, spec: AttackSpec):
        """
        Initialize the attack.

        Args:
            spec: Attack specification

        Raises:
            SpecError: if the spec kind is not handled by this attack
        """
        spec.require(*self.kinds)
        self.spec = spec
        self.logger = get_logger(self.__class__.__name__)

    def rng(self, purpose: str) -> np.random.Generator:
        """
        Random stream for one purpose of this attack.

        Args:
            purpose: Stream label ("select", "noise", ...)

        Returns:
            Generator seeded from the spec seed
        """
        return make_rng(self.spec.seed, f"attack-{self.spec.kind.value}-{purpose}")

    def select(self, eligible: np.ndarray) -> np.ndarray:
        """
        Pick each eligible row independently with probability gamma.

        Args:
            eligible: Boolean row mask

        Returns:
            Boolean mask of rows to poison
        """
        draws = self.rng("select").random(eligible.shape[0])
        return eligible & (draws < self.spec.gamma)

    @abstractmethod
    def apply(self, ds: LabeledDataset) -> LabeledDataset:
        """Return the poisoned copy of ``ds`` (``ds`` itself when nothing changes)."""

    def __call__(self, ds: LabeledDataset) -> LabeledDataset:
        return self.apply(ds)
