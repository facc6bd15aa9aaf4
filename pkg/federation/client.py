"""
Client-side local training (benign and malicious branches).
"""
from typing import Optional

from attacks.factory import apply_attack
from attacks.spec import AttackSpec
from data.dataset import LabeledDataset
from federation.types import Client, ClientUpdate, FederationConfig
from network.layers import WeightSet
from network.training import fit
from utils.exceptions import ClientTrainingError, TrainingDivergenceError
from utils.logger import get_logger

logger = get_logger(__name__)


def client_round(global_weights: WeightSet, local_data: LabeledDataset, cfg: FederationConfig,
                 attack: Optional[AttackSpec] = None, client_id: int = 0,
                 round_index: int = 0) -> ClientUpdate:
    """
    Train a local model starting from the global state.

    Args:
        global_weights: Broadcast global state (left unmodified)
        local_data: The client's clean local dataset
        cfg: Federation settings (local epochs, learning rate, batch size, seed)
        attack: Poisoning applied to ``local_data`` before training
        client_id: Id owning the shuffle stream
        round_index: Current round

    Returns:
        ClientUpdate with the trained weights

    Raises:
        ClientTrainingError: if local training diverges
    """
    data = apply_attack(local_data, attack) if attack is not None else local_data
    try:
        result = fit(global_weights, data.samples, data.labels, cfg.local_train_config(client_id, round_index))
    except TrainingDivergenceError as exc:
        raise ClientTrainingError(str(exc), client_id=client_id) from exc
    logger.debug(
        f"round {round_index} client {client_id}{' (attack)' if attack else ''}: "
        f"{len(data)} samples, loss {result.final_loss}"
    )
    return ClientUpdate(
        client_id=client_id,
        round=round_index,
        weights=result.weights,
        train_loss=result.final_loss,
        num_samples=len(data),
    )


def train_client(client: Client, global_weights: WeightSet, cfg: FederationConfig, round_index: int) -> ClientUpdate:
    """``client_round`` for a ``Client`` record."""
    return client_round(global_weights, client.dataset, cfg, client.attack, client.client_id, round_index)
