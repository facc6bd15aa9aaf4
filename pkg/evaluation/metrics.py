"""
Evaluation quantities: test accuracy, targeted-class accuracy, attack
success rate and detection quality of the defense.
"""
from dataclasses import asdict, dataclass, field
from typing import Any, NamedTuple, Optional

import numpy as np

from config import settings
from data.dataset import LabeledDataset
from federation.types import RoundReport
from network.layers import WeightSet
from network.model import LossKind, batch_loss, predict
from utils.exceptions import EvaluationError


def _require_rows(ds: LabeledDataset, what: str) -> None:
    if len(ds) == 0:
        raise EvaluationError(f"{what} is empty")


def accuracy(w: WeightSet, test: LabeledDataset, chunk_size: Optional[int] = None) -> float:
    """
    Fraction of argmax-correct predictions.

    Raises:
        EvaluationError: on an empty test set
    """
    _require_rows(test, "test set")
    predictions = predict(w, test.samples, chunk_size or settings.eval_chunk_size)
    return float(np.mean(predictions == test.labels))


def targeted_accuracy(w: WeightSet, test: LabeledDataset, target_class: int,
                      chunk_size: Optional[int] = None) -> float:
    """
    Accuracy restricted to test rows of ``target_class``.

    Raises:
        EvaluationError: when the test set has no row of that class
    """
    subset = test.restrict_to_class(target_class)
    _require_rows(subset, f"class-{target_class} test subset")
    return accuracy(w, subset, chunk_size)


def attack_success_rate(w: WeightSet, triggered_test: LabeledDataset, chunk_size: Optional[int] = None) -> float:
    """
    Fraction of triggered inputs classified as the attacker's label.

    Args:
        w: Model weights
        triggered_test: Output of ``make_triggered_testset`` (labels are the backdoor label)
        chunk_size: Rows per forward pass

    Returns:
        ASR in [0, 1]
    """
    _require_rows(triggered_test, "triggered test set")
    return accuracy(w, triggered_test, chunk_size)


def asr_to_accuracy(asr: float) -> float:
    """1 - ASR, the accuracy-like form used when ranking methods."""
    return 1.0 - asr


def cross_entropy_loss(w: WeightSet, test: LabeledDataset) -> float:
    """Mean cross-entropy over the test set."""
    _require_rows(test, "test set")
    return batch_loss(w, test.samples, test.labels, LossKind.CROSS_ENTROPY)


class DetectionQuality(NamedTuple):
    precision: float
    recall: float


def detection_quality(report: RoundReport) -> DetectionQuality:
    """
    Precision and recall of the rejected set against the true malicious ids.

    An empty rejected set has precision reported as 1.0 (see
    ``precision_defined`` on MetricRecord); with no malicious clients recall is 1.0.
    """
    rejected = set(report.rejected)
    malicious = set(report.ground_truth_malicious)
    hits = len(rejected & malicious)
    precision = hits / len(rejected) if rejected else 1.0
    recall = hits / len(malicious) if malicious else 1.0
    return DetectionQuality(precision, recall)


@dataclass
class MetricRecord:
    """One line of ``metrics.jsonl``."""

    round: int
    accuracy: Optional[float] = None
    loss: Optional[float] = None
    train_loss: Optional[float] = None
    targeted_accuracy: Optional[float] = None
    asr: Optional[float] = None
    detection_precision: Optional[float] = None
    detection_recall: Optional[float] = None
    precision_defined: Optional[bool] = None
    tau: Optional[float] = None
    sigma: Optional[float] = None
    errors: dict[str, float] = field(default_factory=dict)
    survivors: list[int] = field(default_factory=list)
    filtered_ids: list[int] = field(default_factory=list)
    fallback: bool = False
    fallback_reason: Optional[str] = None
    detector_final_loss: Optional[float] = None
    wall_ms: Optional[float] = None

    def __post_init__(self) -> None:
        for name in ("accuracy", "targeted_accuracy", "asr", "detection_precision", "detection_recall"):
            value = getattr(self, name)
            if value is not None and not 0.0 <= value <= 1.0:
                raise EvaluationError(f"{name}={value} is outside [0, 1]")

    def to_dict(self, include_wall_time: bool = False) -> dict[str, Any]:
        payload = asdict(self)
        if not include_wall_time:
            payload.pop("wall_ms")
        return payload


def build_record(report: RoundReport, weights: Optional[WeightSet] = None, test: Optional[LabeledDataset] = None,
                 target_class: Optional[int] = None, triggered_test: Optional[LabeledDataset] = None,
                 chunk_size: Optional[int] = None) -> MetricRecord:
    """
    Assemble a MetricRecord from a round report and, when ``test`` is given, a test-set evaluation.

    Args:
        report: Server round report
        weights: Global state after the round
        test: Central test set (skip evaluation when None)
        target_class: Class for targeted accuracy
        triggered_test: Backdoor test set for ASR
        chunk_size: Rows per forward pass

    Returns:
        MetricRecord
    """
    record = MetricRecord(
        round=report.round,
        train_loss=report.train_loss,
        tau=report.tau,
        sigma=report.sigma,
        errors={str(cid): float(e) for cid, e in sorted(report.errors.items())},
        survivors=list(report.survivors),
        filtered_ids=list(report.rejected),
        fallback=report.fallback,
        fallback_reason=report.fallback_reason,
        detector_final_loss=report.detector_final_loss,
    )
    if report.ground_truth_malicious or report.tau is not None:
        quality = detection_quality(report)
        record.detection_precision = quality.precision
        record.detection_recall = quality.recall
        record.precision_defined = bool(report.rejected)

    if weights is not None and test is not None:
        record.accuracy = accuracy(weights, test, chunk_size)
        record.loss = cross_entropy_loss(weights, test)
        if target_class is not None:
            record.targeted_accuracy = targeted_accuracy(weights, test, target_class, chunk_size)
        if triggered_test is not None and len(triggered_test):
            record.asr = attack_success_rate(weights, triggered_test, chunk_size)
    return record
