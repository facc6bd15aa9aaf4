"""
Federation configuration and the records exchanged during a round.
"""
from dataclasses import dataclass, field
from typing import Optional

from pydantic import BaseModel, ConfigDict, Field, model_validator

from attacks.spec import AttackSpec
from data.dataset import LabeledDataset
from network.layers import TrainConfig, WeightSet
from utils.seeding import derive_seed


class FederationConfig(BaseModel):
    """Client counts, round count and the local/global optimisation settings."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    num_benign: int = Field(ge=1)
    num_malicious: int = Field(default=0, ge=0)
    rounds: int = Field(ge=1)
    local_epochs: int = Field(default=5, ge=0)
    local_lr: float = Field(default=0.02, ge=0.0)
    global_lr: float = Field(default=1.0, gt=0.0)
    batch_size: int = Field(default=20, ge=1)
    seed: int = 0

    @model_validator(mode="after")
    def _no_malicious_majority(self) -> "FederationConfig":
        if 2 * self.num_malicious >= self.total_clients:
            raise ValueError(
                f"num_malicious={self.num_malicious} must stay below half of {self.total_clients} clients"
            )
        return self

    @property
    def total_clients(self) -> int:
        return self.num_benign + self.num_malicious

    @property
    def delta(self) -> float:
        """Attacker ratio r / (k + r)."""
        return self.num_malicious / self.total_clients

    def local_train_config(self, client_id: int, round_index: int) -> TrainConfig:
        """Local SGD settings with a shuffle seed owned by (client, round)."""
        return TrainConfig(
            epochs=self.local_epochs,
            learning_rate=self.local_lr,
            batch_size=self.batch_size,
            seed=derive_seed(self.seed, "client-train", client_id, round_index),
        )


@dataclass
class Client:
    """A participant with its local dataset; ``attack`` is set only on malicious clients."""

    client_id: int
    dataset: LabeledDataset
    attack: Optional[AttackSpec] = None

    @property
    def is_malicious(self) -> bool:
        return self.attack is not None


@dataclass
class ClientUpdate:
    """Full weight set returned by one client for one round."""

    client_id: int
    round: int
    weights: WeightSet
    train_loss: Optional[float] = None
    num_samples: int = 0


@dataclass
class RoundReport:
    """What happened at the server in one round; defense fields stay empty when undefended."""

    round: int
    client_ids: tuple[int, ...]
    survivors: tuple[int, ...]
    errors: dict[int, float] = field(default_factory=dict)
    tau: Optional[float] = None
    sigma: Optional[float] = None
    detector_final_loss: Optional[float] = None
    detector_losses: list[float] = field(default_factory=list)
    fallback: bool = False
    fallback_reason: Optional[str] = None
    ground_truth_malicious: frozenset[int] = frozenset()
    train_loss: Optional[float] = None

    @property
    def rejected(self) -> tuple[int, ...]:
        kept = set(self.survivors)
        return tuple(cid for cid in self.client_ids if cid not in kept)
