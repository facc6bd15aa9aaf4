"""Federated rounds: client training, aggregation and the server loop.

``federation.experiment`` (the full run driver) is imported explicitly.
"""
from .aggregators import (
    AggregatorKind,
    AggregatorSpec,
    BaseAggregator,
    ClippedNoisyAggregator,
    CoordinateMedianAggregator,
    FedAvgAggregator,
    TrimmedMeanAggregator,
    aggregate_baseline,
    apply_global_update,
    build_aggregator,
    fedavg,
    stack_updates,
)
from .client import client_round, train_client
from .server import Defense, collect_updates, run_round
from .types import Client, ClientUpdate, FederationConfig, RoundReport

__all__ = [
    "AggregatorKind",
    "AggregatorSpec",
    "BaseAggregator",
    "ClippedNoisyAggregator",
    "CoordinateMedianAggregator",
    "FedAvgAggregator",
    "TrimmedMeanAggregator",
    "aggregate_baseline",
    "apply_global_update",
    "build_aggregator",
    "fedavg",
    "stack_updates",
    "client_round",
    "train_client",
    "Defense",
    "collect_updates",
    "run_round",
    "Client",
    "ClientUpdate",
    "FederationConfig",
    "RoundReport",
]
