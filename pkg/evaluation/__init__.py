"""Evaluation metrics, significance analysis and report files."""
from .metrics import (
    DetectionQuality,
    MetricRecord,
    accuracy,
    asr_to_accuracy,
    attack_success_rate,
    build_record,
    cross_entropy_loss,
    detection_quality,
    targeted_accuracy,
)
from .reporting import (
    METRICS_SCHEMA,
    REPORT_COLUMNS,
    build_result_matrix,
    final_scores,
    read_jsonl,
    read_reports,
    records_to_frame,
    write_analysis,
    write_metrics,
    write_report,
)
from .significance import FriedmanResult, ResultMatrix, friedman_test, nemenyi_q

__all__ = [
    "DetectionQuality",
    "MetricRecord",
    "accuracy",
    "asr_to_accuracy",
    "attack_success_rate",
    "build_record",
    "cross_entropy_loss",
    "detection_quality",
    "targeted_accuracy",
    "METRICS_SCHEMA",
    "REPORT_COLUMNS",
    "build_result_matrix",
    "final_scores",
    "read_jsonl",
    "read_reports",
    "records_to_frame",
    "write_analysis",
    "write_metrics",
    "write_report",
    "FriedmanResult",
    "ResultMatrix",
    "friedman_test",
    "nemenyi_q",
]
