"""
One federated round at the server: broadcast, collect, filter, aggregate.
"""
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace
from typing import Optional, Protocol, Sequence

import numpy as np

from federation.aggregators import BaseAggregator, apply_global_update
from federation.client import train_client
from federation.types import Client, ClientUpdate, FederationConfig, RoundReport
from network.layers import WeightSet
from utils.logger import get_logger
from utils.seeding import derive_seed

logger = get_logger(__name__)


class Defense(Protocol):
    """Server-side update filter run before aggregation."""

    def defend(self, global_weights: WeightSet, updates: Sequence[ClientUpdate],
               round_index: int) -> tuple[list[ClientUpdate], RoundReport]:
        ...


def collect_updates(global_weights: WeightSet, clients: Sequence[Client], cfg: FederationConfig,
                    round_index: int, executor: Optional[ThreadPoolExecutor] = None) -> list[ClientUpdate]:
    """
    Run local training on every client.

    Args:
        global_weights: Broadcast state
        clients: All participants (every client joins every round)
        cfg: Federation settings
        round_index: Current round
        executor: Optional thread pool for concurrent local training

    Returns:
        Updates sorted by client id
    """
    if executor is None:
        updates = [train_client(c, global_weights, cfg, round_index) for c in clients]
    else:
        updates = list(executor.map(lambda c: train_client(c, global_weights, cfg, round_index), clients))
    return sorted(updates, key=lambda u: u.client_id)


def run_round(global_weights: WeightSet, clients: Sequence[Client], cfg: FederationConfig,
              aggregator: BaseAggregator, round_index: int, defense: Optional[Defense] = None,
              executor: Optional[ThreadPoolExecutor] = None) -> tuple[WeightSet, RoundReport]:
    """
    Execute one round.

    Args:
        global_weights: Current global state
        clients: Participants
        cfg: Federation settings
        aggregator: Aggregation rule for the surviving updates
        round_index: Current round
        defense: Filter applied to the collected updates
        executor: Optional thread pool for local training

    Returns:
        New global state and the round report
    """
    updates = collect_updates(global_weights, clients, cfg, round_index, executor)
    client_ids = tuple(u.client_id for u in updates)

    if defense is not None:
        survivors, report = defense.defend(global_weights, updates, round_index)
    else:
        survivors = updates
        report = RoundReport(round=round_index, client_ids=client_ids, survivors=client_ids)

    aggregate = aggregator.aggregate(survivors, global_weights, derive_seed(cfg.seed, "aggregate", round_index))
    new_weights = apply_global_update(global_weights, aggregate, cfg.global_lr)

    losses = [u.train_loss for u in updates if u.train_loss is not None]
    report = replace(
        report,
        ground_truth_malicious=frozenset(c.client_id for c in clients if c.is_malicious),
        train_loss=float(np.mean(losses)) if losses else None,
    )
    logger.debug(
        f"round {round_index}: kept {len(report.survivors)}/{len(client_ids)}, rejected {list(report.rejected)}"
    )
    return new_weights, report
