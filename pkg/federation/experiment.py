"""
Full experiment driver: load data, partition, run T rounds and persist
every artifact in the run directory.

Run directory layout::

    config.yaml        resolved experiment config
    metadata.json      seed, version, build id, interpreter versions, malicious ids
    partition.json     client id -> sample indices (plus per-round splits when re-partitioning)
    metrics.jsonl      one MetricRecord per round
    timings.jsonl      wall-clock time per round
    report.csv         long-format metrics for plotting and analysis
    checkpoints/       round_XXXX.fnw weight files
    profiles/          round_XXXX.npz activation dumps (defense.dump_profiles)
    run.log            log output of the run
"""
import json
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Union

import numpy as np

from attacks.backdoor import make_triggered_testset
from config import settings
from config.experiment import DatasetConfig, ExperimentConfig, dump_experiment
from data.dataset import LabeledDataset, take_subset
from data.idx import load_idx
from data.partition import PartitionPlan, partition_indices, write_manifest
from data.synthetic import make_synthetic_images
from defense.fednia import FedNIADefense
from evaluation.metrics import MetricRecord, build_record
from evaluation.reporting import append_jsonl, records_to_frame, timing_row, write_report
from federation.aggregators import build_aggregator
from federation.server import run_round
from federation.types import Client
from network.layers import WeightSet
from network.model import init_weights
from network.serialization import save_weights
from utils.exceptions import RunIOError
from utils.logger import RunLogCapture, get_logger
from utils.provenance import run_metadata
from utils.seeding import derive_seed

logger = get_logger(__name__)

PathLike = Union[str, Path]


@dataclass
class ExperimentResult:
    """Where a run was written and what it produced."""

    run_dir: Path
    weights: WeightSet
    malicious_ids: list[int]
    records: list[MetricRecord] = field(default_factory=list)

    @property
    def final_record(self) -> Optional[MetricRecord]:
        return self.records[-1] if self.records else None


def load_datasets(dataset: DatasetConfig, seed: int) -> tuple[LabeledDataset, LabeledDataset]:
    """
    Load (train, test) for an experiment, applying the configured subsets.

    Args:
        dataset: Dataset section of the config
        seed: Master seed (subset selection, synthetic sample noise)

    Returns:
        Training set and central test set
    """
    if dataset.source == "synthetic":
        num_classes = dataset.num_classes or 10
        shape = tuple(dataset.synthetic_image_shape)
        train = make_synthetic_images(dataset.synthetic_train_size, num_classes, shape, seed, split="train")
        test = make_synthetic_images(dataset.synthetic_test_size, num_classes, shape, seed, split="test")
    else:
        train = load_idx(dataset.train_images, dataset.train_labels, dataset.num_classes)
        test = load_idx(dataset.test_images, dataset.test_labels, dataset.num_classes)
        if train.num_classes != test.num_classes:
            num_classes = max(train.num_classes, test.num_classes)
            train = LabeledDataset(train.samples, train.labels, num_classes, train.image_shape)
            test = LabeledDataset(test.samples, test.labels, num_classes, test.image_shape)
    train = take_subset(train, dataset.train_subset, derive_seed(seed, "train-subset"))
    test = take_subset(test, dataset.test_subset, derive_seed(seed, "test-subset"))
    logger.info(f"Loaded {dataset.name}: {len(train)} train / {len(test)} test, {train.num_classes} classes")
    return train, test


def build_clients(train: LabeledDataset, indices: list[np.ndarray], cfg: ExperimentConfig,
                  malicious_ids: list[int]) -> list[Client]:
    """Wrap partitions into Client records, giving each malicious client its own attack stream."""
    attacks = cfg.attack_map(malicious_ids)
    clients = []
    for cid, idx in enumerate(indices):
        spec = attacks.get(cid)
        if spec is not None:
            spec = spec.with_seed(derive_seed(cfg.seed, "attack", spec.seed, cid))
        clients.append(Client(client_id=cid, dataset=train.subset(idx), attack=spec))
    return clients


def _write_json(path: Path, payload: dict) -> None:
    try:
        path.write_text(json.dumps(payload, indent=2, sort_keys=True), encoding="utf-8")
    except OSError as exc:
        raise RunIOError("cannot write", path) from exc


def _prepare_run_dir(run_dir: Path) -> None:
    try:
        run_dir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise RunIOError("cannot create run directory", run_dir) from exc
    for name in ("metrics.jsonl", "timings.jsonl", "run.log"):
        (run_dir / name).unlink(missing_ok=True)


def run_experiment(cfg: ExperimentConfig, run_dir: Optional[PathLike] = None,
                   threads: Optional[int] = None) -> ExperimentResult:
    """
    Execute all rounds of an experiment and persist its artifacts.

    Args:
        cfg: Validated experiment config
        run_dir: Output directory (defaults to ``<output_dir>/<name>``)
        threads: Worker threads for local training and probing (defaults to settings)

    Returns:
        ExperimentResult
    """
    run_dir = Path(run_dir) if run_dir is not None else Path(cfg.output_dir) / cfg.name
    threads = threads or settings.threads
    _prepare_run_dir(run_dir)

    with RunLogCapture(run_dir / "run.log"):
        executor = ThreadPoolExecutor(max_workers=threads) if threads > 1 else None
        try:
            return _run(cfg, run_dir, executor)
        finally:
            if executor is not None:
                executor.shutdown(wait=True)


def _run(cfg: ExperimentConfig, run_dir: Path, executor: Optional[ThreadPoolExecutor]) -> ExperimentResult:
    fed = cfg.federation
    seed = cfg.seed
    logger.info(
        f"Experiment '{cfg.name}': k={fed.num_benign} r={fed.num_malicious} T={fed.rounds} "
        f"method={cfg.method} attack={cfg.attack_label}"
    )

    train, test = load_datasets(cfg.dataset, seed)
    specs = cfg.model.specs(train.num_features, train.num_classes)
    weights = init_weights(specs, derive_seed(seed, "model-init"), np.dtype(cfg.model.dtype))

    plan = PartitionPlan(fed.total_clients, derive_seed(seed, "partition"), cfg.partition.scheme,
                         cfg.partition.classes_per_client)
    indices = partition_indices(train, plan)
    malicious_ids = cfg.resolve_malicious_ids()
    clients = build_clients(train, indices, cfg, malicious_ids)
    logger.info(f"Malicious clients: {malicious_ids}")

    aggregator = build_aggregator(cfg.aggregator)
    defense = None
    if cfg.defense is not None:
        defense = FedNIADefense(cfg.defense, seed=derive_seed(seed, "defense"), executor=executor,
                                profile_dir=run_dir / "profiles")

    backdoor = cfg.backdoor_spec()
    triggered = make_triggered_testset(test, backdoor) if backdoor is not None else None
    target_class = cfg.targeted_class()

    dump_experiment(cfg, run_dir / "config.yaml")
    _write_json(run_dir / "metadata.json", run_metadata(seed, {
        "name": cfg.name,
        "method": cfg.method,
        "attack": cfg.attack_label,
        "delta": fed.delta,
        "malicious_ids": malicious_ids,
        "num_parameters": weights.num_parameters,
        "train_size": len(train),
        "test_size": len(test),
    }))

    round_splits: dict[int, list[np.ndarray]] = {}
    records: list[MetricRecord] = []
    checkpoint_dir = run_dir / "checkpoints"
    for t in range(fed.rounds):
        if cfg.partition.repartition_each_round and t > 0:
            round_plan = PartitionPlan(fed.total_clients, derive_seed(seed, "partition", t),
                                       cfg.partition.scheme, cfg.partition.classes_per_client)
            round_splits[t] = partition_indices(train, round_plan)
            clients = build_clients(train, round_splits[t], cfg, malicious_ids)

        started = time.perf_counter()
        weights, report = run_round(weights, clients, fed, aggregator, t, defense, executor)
        round_ms = (time.perf_counter() - started) * 1000.0

        evaluate = (t + 1) % cfg.eval.every == 0 or t == fed.rounds - 1
        started = time.perf_counter()
        record = build_record(
            report,
            weights if evaluate else None,
            test if evaluate else None,
            target_class,
            triggered,
            cfg.eval.chunk_size,
        )
        eval_ms = (time.perf_counter() - started) * 1000.0
        if cfg.eval.record_wall_time:
            record.wall_ms = round(round_ms, 3)
        records.append(record)
        append_jsonl(run_dir / "metrics.jsonl", record.to_dict(cfg.eval.record_wall_time))
        append_jsonl(run_dir / "timings.jsonl", timing_row(t, round_ms, eval_ms))

        if evaluate:
            logger.info(
                f"round {t}: accuracy={record.accuracy:.4f} loss={record.loss:.4f}"
                + (f" asr={record.asr:.4f}" if record.asr is not None else "")
                + (f" rejected={record.filtered_ids}" if defense is not None else "")
            )
        if cfg.eval.checkpoint_every and (t + 1) % cfg.eval.checkpoint_every == 0:
            save_weights(weights, checkpoint_dir / f"round_{t:04d}.fnw", seed)

    save_weights(weights, checkpoint_dir / f"round_{fed.rounds - 1:04d}.fnw", seed)
    write_manifest(indices, run_dir / "partition.json", round_splits or None)
    frame = records_to_frame(records, cfg.name, cfg.dataset.name, cfg.attack_label, fed.delta, cfg.method)
    write_report(frame, run_dir / "report.csv")
    logger.info(f"Run written to {run_dir}")
    return ExperimentResult(run_dir=run_dir, weights=weights, malicious_ids=malicious_ids, records=records)
