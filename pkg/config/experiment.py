"""
Experiment definition files: YAML validated by Pydantic models.

Import explicitly (``from config.experiment import ExperimentConfig``); the
package ``__init__`` only exposes runtime settings.
"""
from pathlib import Path
from typing import Any, Literal, Optional, Union

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from attacks.spec import AttackKind, AttackSpec
from data.partition import PartitionScheme
from defense.fednia import DefenseParams
from federation.aggregators import AggregatorSpec
from federation.types import FederationConfig
from network.layers import LayerSpec, classifier_specs
from utils.exceptions import ConfigurationError, RunIOError
from utils.seeding import make_rng

SCHEMA_VERSION = 1

PathLike = Union[str, Path]


class _Frozen(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")


class DatasetConfig(_Frozen):
    """Where the data comes from and how much of it is used."""

    name: str = "mnist"
    source: Literal["idx", "synthetic"] = "idx"
    train_images: Optional[str] = None
    train_labels: Optional[str] = None
    test_images: Optional[str] = None
    test_labels: Optional[str] = None
    num_classes: Optional[int] = Field(default=None, ge=2)
    train_subset: Optional[int] = Field(default=None, ge=1)
    test_subset: Optional[int] = Field(default=None, ge=1)
    synthetic_train_size: int = Field(default=2000, ge=1)
    synthetic_test_size: int = Field(default=500, ge=1)
    synthetic_image_shape: tuple[int, int] = (8, 8)

    @model_validator(mode="after")
    def _idx_paths_present(self) -> "DatasetConfig":
        if self.source == "idx":
            missing = [f for f in ("train_images", "train_labels", "test_images", "test_labels") if not getattr(self, f)]
            if missing:
                raise ValueError(f"idx datasets need {', '.join(missing)}")
        return self

    def paths(self) -> list[Path]:
        if self.source != "idx":
            return []
        return [Path(p) for p in (self.train_images, self.train_labels, self.test_images, self.test_labels)]


class ModelConfig(_Frozen):
    """Dense classifier: ReLU hidden layers and a Softmax output."""

    hidden_sizes: list[int] = Field(default_factory=lambda: [128, 128, 64])
    dtype: Literal["float32", "float64"] = "float32"

    @model_validator(mode="after")
    def _positive_widths(self) -> "ModelConfig":
        if any(h < 1 for h in self.hidden_sizes):
            raise ValueError("hidden sizes must be >= 1")
        return self

    def specs(self, input_size: int, num_classes: int) -> list[LayerSpec]:
        return classifier_specs(input_size, self.hidden_sizes, num_classes)


class PartitionConfig(_Frozen):
    """Client data split."""

    scheme: PartitionScheme = PartitionScheme.UNIFORM_RANDOM
    classes_per_client: Optional[int] = Field(default=None, ge=1)
    repartition_each_round: bool = False

    @model_validator(mode="after")
    def _skew_needs_classes(self) -> "PartitionConfig":
        if self.scheme is PartitionScheme.LABEL_SKEW and self.classes_per_client is None:
            raise ValueError("label_skew needs classes_per_client")
        return self


class EvalConfig(_Frozen):
    """Evaluation cadence and artifact switches."""

    every: int = Field(default=5, ge=1, description="Test-set evaluation every n rounds (and the last round)")
    record_wall_time: bool = False
    checkpoint_every: Optional[int] = Field(default=None, ge=1)
    chunk_size: Optional[int] = Field(default=None, ge=1)


class AttackAssignment(_Frozen):
    """An attack and the malicious clients running it (all unassigned malicious clients when omitted)."""

    spec: AttackSpec
    client_ids: Optional[list[int]] = None


class ExperimentConfig(_Frozen):
    """A complete, reproducible experiment."""

    schema_version: Literal[1] = SCHEMA_VERSION
    name: str = "experiment"
    dataset: DatasetConfig
    model: ModelConfig = Field(default_factory=ModelConfig)
    federation: FederationConfig
    partition: PartitionConfig = Field(default_factory=PartitionConfig)
    attacks: list[AttackAssignment] = Field(default_factory=list)
    malicious_ids: Optional[list[int]] = None
    aggregator: AggregatorSpec = Field(default_factory=AggregatorSpec)
    defense: Optional[DefenseParams] = None
    eval: EvalConfig = Field(default_factory=EvalConfig)
    output_dir: str = "runs"

    @model_validator(mode="after")
    def _check_assignments(self) -> "ExperimentConfig":
        total = self.federation.total_clients
        r = self.federation.num_malicious
        if self.malicious_ids is not None:
            if len(set(self.malicious_ids)) != len(self.malicious_ids):
                raise ValueError("malicious_ids contains duplicates")
            if len(self.malicious_ids) != r:
                raise ValueError(f"{len(self.malicious_ids)} malicious_ids given but num_malicious is {r}")
            if any(not 0 <= cid < total for cid in self.malicious_ids):
                raise ValueError(f"malicious_ids must lie in [0, {total})")
        if r > 0 and not self.attacks:
            raise ValueError("num_malicious > 0 requires at least one attack")
        if sum(1 for a in self.attacks if a.client_ids is None) > 1:
            raise ValueError("at most one attack may omit client_ids")
        seen: set[int] = set()
        for assignment in self.attacks:
            for cid in assignment.client_ids or []:
                if cid in seen:
                    raise ValueError(f"client {cid} is assigned two attacks")
                if self.malicious_ids is not None and cid not in self.malicious_ids:
                    raise ValueError(f"attacked client {cid} is not listed in malicious_ids")
                if not 0 <= cid < total:
                    raise ValueError(f"attacked client {cid} is outside [0, {total})")
                seen.add(cid)
        if len(seen) > r:
            raise ValueError(f"{len(seen)} clients are assigned attacks but num_malicious is {r}")
        return self

    @property
    def seed(self) -> int:
        return self.federation.seed

    @property
    def method(self) -> str:
        """Method label used in reports: ``fednia`` when defended, else the aggregator kind."""
        return "fednia" if self.defense is not None else self.aggregator.kind.value

    @property
    def attack_label(self) -> str:
        if self.federation.num_malicious == 0 or not self.attacks:
            return "none"
        return "+".join(dict.fromkeys(a.spec.kind.value for a in self.attacks))

    def resolve_malicious_ids(self) -> list[int]:
        """
        Malicious client ids, fixed for the whole run.

        Explicitly assigned ids come first; the rest are drawn from the
        ``adversary`` stream of the master seed.
        """
        r = self.federation.num_malicious
        if self.malicious_ids is not None:
            return sorted(self.malicious_ids)
        chosen = {cid for a in self.attacks for cid in (a.client_ids or [])}
        pool = [cid for cid in range(self.federation.total_clients) if cid not in chosen]
        extra = make_rng(self.seed, "adversary").permutation(pool)[: max(r - len(chosen), 0)]
        return sorted(chosen | {int(cid) for cid in extra})

    def attack_map(self, malicious_ids: list[int]) -> dict[int, AttackSpec]:
        """Client id -> attack spec for every malicious client."""
        mapping: dict[int, AttackSpec] = {}
        default: Optional[AttackSpec] = None
        for assignment in self.attacks:
            if assignment.client_ids is None:
                default = assignment.spec
            else:
                mapping.update({cid: assignment.spec for cid in assignment.client_ids})
        for cid in malicious_ids:
            if cid not in mapping:
                if default is None:
                    raise ConfigurationError(f"malicious client {cid} has no attack assigned")
                mapping[cid] = default
        return mapping

    def targeted_class(self) -> Optional[int]:
        """Class whose accuracy is tracked: the first targeted attack's target class."""
        if self.federation.num_malicious == 0:
            return None
        for assignment in self.attacks:
            spec = assignment.spec
            if spec.kind.is_targeted:
                if spec.target_class is not None:
                    return spec.target_class
                if spec.label_map:
                    return min(spec.label_map)
        return None

    def backdoor_spec(self) -> Optional[AttackSpec]:
        if self.federation.num_malicious == 0:
            return None
        return next((a.spec for a in self.attacks if a.spec.kind is AttackKind.BACKDOOR), None)

    def to_dict(self) -> dict[str, Any]:
        return self.model_dump(mode="json", by_alias=True)

    def override(self, changes: dict[str, Any]) -> "ExperimentConfig":
        """
        Deep-merge ``changes`` into this config and re-validate.

        Args:
            changes: Nested mapping, e.g. ``{"federation": {"seed": 3}}``

        Returns:
            New validated config

        Raises:
            ConfigurationError: if the result is invalid
        """
        return parse_experiment(_deep_merge(self.to_dict(), changes))


def _deep_merge(base: dict[str, Any], changes: dict[str, Any]) -> dict[str, Any]:
    merged = dict(base)
    for key, value in changes.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = _deep_merge(merged[key], value)
        else:
            merged[key] = value
    return merged


def format_validation_error(exc: ValidationError) -> str:
    """One ``field.path: message`` entry per violation."""
    return "; ".join(f"{'.'.join(str(p) for p in err['loc']) or 'config'}: {err['msg']}" for err in exc.errors())


def parse_experiment(payload: Any) -> ExperimentConfig:
    """
    Validate a mapping into an ExperimentConfig.

    Raises:
        ConfigurationError: with field paths of every violation
    """
    if not isinstance(payload, dict):
        raise ConfigurationError("experiment config must be a mapping")
    try:
        return ExperimentConfig.model_validate(payload)
    except ValidationError as exc:
        raise ConfigurationError(f"invalid experiment config: {format_validation_error(exc)}") from exc


def load_experiment(path: PathLike) -> ExperimentConfig:
    """
    Read and validate a YAML experiment file.

    Raises:
        RunIOError: unreadable file
        ConfigurationError: malformed YAML or schema violations
    """
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise RunIOError("cannot read experiment config", path) from exc
    try:
        payload = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigurationError(f"{path}: malformed YAML: {exc}") from exc
    return parse_experiment(payload)


def dump_experiment(cfg: ExperimentConfig, path: Optional[PathLike] = None) -> str:
    """
    Serialize to YAML, optionally writing it to ``path``.

    Returns:
        The YAML text
    """
    text = yaml.safe_dump(cfg.to_dict(), sort_keys=False)
    if path is not None:
        path = Path(path)
        try:
            path.parent.mkdir(parents=True, exist_ok=True)
            path.write_text(text, encoding="utf-8")
        except OSError as exc:
            raise RunIOError("cannot write experiment config", path) from exc
    return text
