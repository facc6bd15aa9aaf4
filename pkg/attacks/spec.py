"""
Attack specifications: which data-poisoning transform a malicious client
applies, and with what parameters. These models are embedded verbatim in
experiment config files.
"""
from enum import Enum
from typing import Annotated, Literal, Optional, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from utils.exceptions import SpecError
from utils.seeding import make_rng


class AttackKind(str, Enum):
    """Threat-model families."""

    SAMPLE_POISON_UNTARGETED = "sample_poison_untargeted"
    SAMPLE_POISON_TARGETED = "sample_poison_targeted"
    LABEL_FLIP_UNTARGETED = "label_flip_untargeted"
    LABEL_FLIP_TARGETED = "label_flip_targeted"
    BACKDOOR = "backdoor"

    @property
    def is_sample_poison(self) -> bool:
        return self in (AttackKind.SAMPLE_POISON_UNTARGETED, AttackKind.SAMPLE_POISON_TARGETED)

    @property
    def is_label_flip(self) -> bool:
        return self in (AttackKind.LABEL_FLIP_UNTARGETED, AttackKind.LABEL_FLIP_TARGETED)

    @property
    def is_targeted(self) -> bool:
        return self in (AttackKind.SAMPLE_POISON_TARGETED, AttackKind.LABEL_FLIP_TARGETED, AttackKind.BACKDOOR)


class TriggerPatch(BaseModel):
    """Pixel backdoor: a solid rectangle written at a fixed intensity."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    kind: Literal["patch"] = "patch"
    row: int = Field(default=0, ge=0)
    col: int = Field(default=0, ge=0)
    height: int = Field(default=3, ge=1)
    width: int = Field(default=3, ge=1)
    intensity: float = Field(default=1.0, ge=0.0, le=1.0)

    def check_fits(self, image_shape: tuple[int, int]) -> None:
        rows, cols = image_shape
        if self.row + self.height > rows or self.col + self.width > cols:
            raise SpecError(
                f"trigger patch rows {self.row}..{self.row + self.height - 1}, cols "
                f"{self.col}..{self.col + self.width - 1} leaves the {rows}x{cols} image"
            )

    def mask(self, image_shape: tuple[int, int]) -> np.ndarray:
        """Flat boolean mask of the pixels the trigger touches."""
        self.check_fits(image_shape)
        grid = np.zeros(image_shape, dtype=bool)
        grid[self.row:self.row + self.height, self.col:self.col + self.width] = True
        return grid.ravel()

    def apply(self, samples: np.ndarray, image_shape: tuple[int, int]) -> np.ndarray:
        out = samples.copy()
        out[:, self.mask(image_shape)] = np.asarray(self.intensity, dtype=samples.dtype)
        return out


class NoisePatternTrigger(BaseModel):
    """Noise backdoor: a fixed seeded pattern added to the whole image."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    kind: Literal["noise_pattern"] = "noise_pattern"
    amplitude: float = Field(default=0.3, gt=0.0, le=1.0)
    pattern_seed: int = 0

    def pattern(self, num_features: int) -> np.ndarray:
        rng = make_rng(self.pattern_seed, "noise-trigger", num_features)
        return rng.uniform(-self.amplitude, self.amplitude, size=num_features)

    def mask(self, image_shape: tuple[int, int]) -> np.ndarray:
        return np.ones(image_shape[0] * image_shape[1], dtype=bool)

    def apply(self, samples: np.ndarray, image_shape: tuple[int, int]) -> np.ndarray:
        shifted = samples.astype(np.float64) + self.pattern(samples.shape[1])
        return np.clip(shifted, 0.0, 1.0).astype(samples.dtype)


Trigger = Annotated[Union[TriggerPatch, NoisePatternTrigger], Field(discriminator="kind")]


class AttackSpec(BaseModel):
    """Attack kind plus its parameters (gamma, target class, trigger, forged label)."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    kind: AttackKind
    gamma: float = Field(default=1.0, ge=0.0, le=1.0)
    target_class: Optional[int] = Field(default=None, ge=0)
    label_map: Optional[dict[int, int]] = None
    trigger: Optional[Trigger] = None
    backdoor_label: Optional[int] = Field(default=None, ge=0)
    seed: int = 0
    noise_scale: float = Field(default=1.0, ge=0.0)

    @field_validator("label_map")
    @classmethod
    def _no_identity_mapping(cls, value: Optional[dict[int, int]]) -> Optional[dict[int, int]]:
        if value is not None:
            for source, target in value.items():
                if source == target:
                    raise ValueError(f"label_map maps class {source} to itself")
                if source < 0 or target < 0:
                    raise ValueError("label_map classes must be >= 0")
        return value

    @model_validator(mode="after")
    def _check_kind_requirements(self) -> "AttackSpec":
        if self.kind is AttackKind.SAMPLE_POISON_TARGETED and self.target_class is None:
            raise ValueError("sample_poison_targeted requires target_class")
        if self.kind is AttackKind.LABEL_FLIP_TARGETED and self.target_class is None and not self.label_map:
            raise ValueError("label_flip_targeted requires label_map or target_class")
        if self.kind is AttackKind.BACKDOOR:
            if self.target_class is None or self.backdoor_label is None or self.trigger is None:
                raise ValueError("backdoor requires target_class, backdoor_label and trigger")
            if self.backdoor_label == self.target_class:
                raise ValueError("backdoor_label must differ from target_class")
        return self

    @classmethod
    def parse(cls, payload: dict) -> "AttackSpec":
        """
        Validate a plain mapping into an AttackSpec.

        Raises:
            SpecError: listing every violated field
        """
        try:
            return cls.model_validate(payload)
        except ValidationError as exc:
            problems = "; ".join(
                f"{'.'.join(str(p) for p in err['loc']) or 'spec'}: {err['msg']}" for err in exc.errors()
            )
            raise SpecError(f"invalid attack spec: {problems}") from exc

    @classmethod
    def backdoor(cls, target_class: int = 1, backdoor_label: int = 7, **overrides) -> "AttackSpec":
        """Default pixel backdoor: 3x3 corner patch at intensity 1.0."""
        return cls(
            kind=AttackKind.BACKDOOR,
            target_class=target_class,
            backdoor_label=backdoor_label,
            trigger=overrides.pop("trigger", TriggerPatch()),
            **overrides,
        )

    def with_seed(self, seed: int) -> "AttackSpec":
        return self.model_copy(update={"seed": int(seed)})

    def require(self, *kinds: AttackKind) -> None:
        """Raise SpecError unless this spec is one of ``kinds``."""
        if self.kind not in kinds:
            expected = ", ".join(k.value for k in kinds)
            raise SpecError(f"attack kind {self.kind.value} is not one of: {expected}")
