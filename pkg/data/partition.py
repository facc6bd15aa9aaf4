"""
Client partitioning: equal-size disjoint local datasets drawn without
replacement, either uniformly or with per-client label skew.
"""
import json
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Optional, Union

import numpy as np

from data.dataset import LabeledDataset
from utils.exceptions import ConfigurationError, RunIOError
from utils.logger import get_logger
from utils.seeding import make_rng

logger = get_logger(__name__)


class PartitionScheme(str, Enum):
    """How samples are assigned to clients."""

    UNIFORM_RANDOM = "uniform_random"
    LABEL_SKEW = "label_skew"


@dataclass(frozen=True)
class PartitionPlan:
    """Partition request for k+r clients."""

    num_clients: int
    seed: int
    scheme: PartitionScheme = PartitionScheme.UNIFORM_RANDOM
    classes_per_client: Optional[int] = None

    def __post_init__(self) -> None:
        if self.num_clients < 2:
            raise ConfigurationError(f"num_clients must be >= 2, got {self.num_clients}")
        object.__setattr__(self, "scheme", PartitionScheme(self.scheme))
        if self.scheme is PartitionScheme.LABEL_SKEW and (self.classes_per_client or 0) < 1:
            raise ConfigurationError("label_skew partitioning needs classes_per_client >= 1")


def partition_indices(ds: LabeledDataset, plan: PartitionPlan) -> list[np.ndarray]:
    """
    Assign disjoint sample indices of size floor(m / num_clients) to each client.

    Args:
        ds: Dataset to split
        plan: Partition plan

    Returns:
        One index array per client

    Raises:
        ConfigurationError: if m < num_clients or a skewed split cannot be filled
    """
    m = len(ds)
    if m < plan.num_clients:
        raise ConfigurationError(f"{m} samples cannot be split across {plan.num_clients} clients")
    size = m // plan.num_clients
    dropped = m - size * plan.num_clients
    if dropped:
        logger.debug(f"Dropping {dropped} remainder samples to keep client datasets equal-sized")
    rng = make_rng(plan.seed, f"partition-{plan.scheme.value}")
    if plan.scheme is PartitionScheme.UNIFORM_RANDOM:
        order = rng.permutation(m)
        return [np.sort(order[i * size:(i + 1) * size]) for i in range(plan.num_clients)]
    return _label_skew(ds, plan, size, rng)


def _label_skew(ds: LabeledDataset, plan: PartitionPlan, size: int, rng: np.random.Generator) -> list[np.ndarray]:
    classes_per_client = min(int(plan.classes_per_client or 1), ds.num_classes)
    pools = {c: list(rng.permutation(np.flatnonzero(ds.labels == c))) for c in range(ds.num_classes)}
    class_order = rng.permutation(ds.num_classes)
    assignments = []
    for client in range(plan.num_clients):
        chosen = [int(class_order[(client * classes_per_client + j) % ds.num_classes])
                  for j in range(classes_per_client)]
        quota = [size // classes_per_client + (1 if j < size % classes_per_client else 0)
                 for j in range(classes_per_client)]
        picked: list[int] = []
        for label, count in zip(chosen, quota):
            take = min(count, len(pools[label]))
            picked.extend(pools[label][:take])
            del pools[label][:take]
        for label in chosen:
            if len(picked) >= size:
                break
            take = min(size - len(picked), len(pools[label]))
            picked.extend(pools[label][:take])
            del pools[label][:take]
        if len(picked) < size:
            raise ConfigurationError(
                f"label_skew: client {client} restricted to classes {chosen} can only get "
                f"{len(picked)} of {size} samples; raise classes_per_client"
            )
        assignments.append(np.sort(np.asarray(picked, dtype=np.int64)))
    return assignments


def partition(ds: LabeledDataset, plan: PartitionPlan) -> list[LabeledDataset]:
    """Materialise :func:`partition_indices` into per-client datasets."""
    return [ds.subset(idx) for idx in partition_indices(ds, plan)]


def write_manifest(indices: list[np.ndarray], path: Union[str, Path],
                   rounds: Optional[dict[int, list[np.ndarray]]] = None) -> Path:
    """
    Write ``{client_id: [sample indices]}`` as JSON.

    Args:
        indices: Per-client index arrays
        path: Output file
        rounds: Optional per-round re-partitions, stored under "rounds"

    Returns:
        The written path
    """
    path = Path(path)
    manifest: dict = {"clients": {str(i): idx.tolist() for i, idx in enumerate(indices)}}
    if rounds:
        manifest["rounds"] = {
            str(t): {str(i): idx.tolist() for i, idx in enumerate(parts)} for t, parts in rounds.items()
        }
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(manifest), encoding="utf-8")
    except OSError as exc:
        raise RunIOError("cannot write partition manifest", path) from exc
    return path
