"""
Run artifacts: metrics JSONL, long-format report CSV, final scores and the
result matrix fed to the Friedman analysis.
"""
import json
from pathlib import Path
from typing import Any, Iterable, Sequence, Union

import numpy as np
import pandas as pd

from evaluation.metrics import MetricRecord, asr_to_accuracy
from evaluation.significance import FriedmanResult, ResultMatrix
from utils.exceptions import AnalysisError, RunIOError
from utils.logger import get_logger

logger = get_logger(__name__)

PathLike = Union[str, Path]

REPORT_COLUMNS = ["experiment", "dataset", "attack", "delta", "method", "round", "metric", "value"]
REPORTED_METRICS = (
    "accuracy",
    "loss",
    "train_loss",
    "targeted_accuracy",
    "asr",
    "detection_precision",
    "detection_recall",
    "tau",
    "sigma",
)
EXPERIMENT_KEYS = ["dataset", "attack", "delta"]

_optional_number = {"type": ["number", "null"]}
_optional_rate = {"type": ["number", "null"], "minimum": 0, "maximum": 1}

METRICS_SCHEMA: dict[str, Any] = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "metrics.jsonl record",
    "type": "object",
    "required": ["round", "accuracy", "errors", "survivors", "filtered_ids", "fallback"],
    "properties": {
        "round": {"type": "integer", "minimum": 0},
        "accuracy": _optional_rate,
        "loss": _optional_number,
        "train_loss": _optional_number,
        "targeted_accuracy": _optional_rate,
        "asr": _optional_rate,
        "detection_precision": _optional_rate,
        "detection_recall": _optional_rate,
        "precision_defined": {"type": ["boolean", "null"]},
        "tau": _optional_number,
        "sigma": _optional_number,
        "errors": {"type": "object", "additionalProperties": {"type": "number"}},
        "survivors": {"type": "array", "items": {"type": "integer"}},
        "filtered_ids": {"type": "array", "items": {"type": "integer"}},
        "fallback": {"type": "boolean"},
        "fallback_reason": {"type": ["string", "null"]},
        "detector_final_loss": _optional_number,
        "wall_ms": {"type": ["number", "null"], "minimum": 0},
    },
    "additionalProperties": False,
}


def append_jsonl(path: PathLike, payload: dict[str, Any]) -> None:
    """Append one JSON object as a line."""
    path = Path(path)
    try:
        with path.open("a", encoding="utf-8") as handle:
            handle.write(json.dumps(payload) + "\n")
    except OSError as exc:
        raise RunIOError("cannot append to", path) from exc


def write_metrics(records: Iterable[MetricRecord], path: PathLike, include_wall_time: bool = False) -> Path:
    """Write ``metrics.jsonl`` from scratch."""
    path = Path(path)
    try:
        with path.open("w", encoding="utf-8") as handle:
            for record in records:
                handle.write(json.dumps(record.to_dict(include_wall_time)) + "\n")
    except OSError as exc:
        raise RunIOError("cannot write metrics", path) from exc
    return path


def read_jsonl(path: PathLike) -> list[dict[str, Any]]:
    """Read every JSON line of a file."""
    path = Path(path)
    try:
        lines = path.read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise RunIOError("cannot read", path) from exc
    return [json.loads(line) for line in lines if line.strip()]


def records_to_frame(records: Sequence[Union[MetricRecord, dict[str, Any]]], experiment: str, dataset: str,
                     attack: str, delta: float, method: str) -> pd.DataFrame:
    """
    Convert per-round records to the long report format.

    Args:
        records: MetricRecords or their dicts
        experiment: Run name
        dataset: Dataset name
        attack: Attack kind value, or "none"
        delta: Attacker ratio
        method: Aggregation method label

    Returns:
        DataFrame with REPORT_COLUMNS, one row per (round, metric) with a value
    """
    rows = []
    for record in records:
        payload = record.to_dict() if isinstance(record, MetricRecord) else record
        for metric in REPORTED_METRICS:
            value = payload.get(metric)
            if value is not None:
                rows.append([experiment, dataset, attack, float(delta), method, int(payload["round"]), metric,
                             float(value)])
    return pd.DataFrame(rows, columns=REPORT_COLUMNS)


def write_report(frame: pd.DataFrame, path: PathLike) -> Path:
    """Write a long-format ``report.csv``."""
    path = Path(path)
    try:
        frame.to_csv(path, index=False)
    except OSError as exc:
        raise RunIOError("cannot write report", path) from exc
    return path


def read_reports(paths: Sequence[PathLike]) -> pd.DataFrame:
    """
    Concatenate report CSVs.

    Raises:
        RunIOError: unreadable file
        AnalysisError: missing columns
    """
    frames = []
    for path in paths:
        try:
            frame = pd.read_csv(path)
        except (OSError, pd.errors.ParserError, pd.errors.EmptyDataError) as exc:
            raise RunIOError("cannot read report", path) from exc
        missing = set(REPORT_COLUMNS) - set(frame.columns)
        if missing:
            raise AnalysisError(f"{path} lacks report columns {sorted(missing)}")
        frames.append(frame[REPORT_COLUMNS])
    if not frames:
        raise AnalysisError("no report files given")
    return pd.concat(frames, ignore_index=True)


def final_scores(frame: pd.DataFrame) -> pd.DataFrame:
    """
    One accuracy-like score per experiment and method from the last evaluated round.

    Backdoor experiments score 1 - ASR, targeted experiments score the
    targeted-class accuracy, all others the test accuracy.

    Returns:
        DataFrame with columns dataset, attack, delta, method, metric, score
    """
    rows = []
    for keys, group in frame.groupby(EXPERIMENT_KEYS + ["method"], sort=True):
        available = set(group["metric"])
        metric = next((m for m in ("asr", "targeted_accuracy", "accuracy") if m in available), None)
        if metric is None:
            continue
        series = group[group["metric"] == metric].sort_values("round")
        value = float(series["value"].iloc[-1])
        rows.append([*keys, metric, asr_to_accuracy(value) if metric == "asr" else value])
    return pd.DataFrame(rows, columns=EXPERIMENT_KEYS + ["method", "metric", "score"])


def build_result_matrix(frame: pd.DataFrame) -> ResultMatrix:
    """
    Pivot final scores into experiments x methods.

    Raises:
        AnalysisError: when an experiment lacks a score for some method
    """
    scores = final_scores(frame)
    if scores.empty:
        raise AnalysisError("reports contain no accuracy, targeted accuracy or ASR values")
    scores["experiment"] = scores.apply(lambda r: f"{r['dataset']}/{r['attack']}/delta={r['delta']:g}", axis=1)
    pivot = scores.pivot(index="experiment", columns="method", values="score").sort_index()
    return ResultMatrix.from_frame(pivot[sorted(pivot.columns)])


def write_analysis(result: FriedmanResult, matrix: ResultMatrix, output_dir: PathLike) -> tuple[Path, Path]:
    """
    Write ``ranks.csv`` (per-experiment ranks plus the average row) and ``friedman.json``.

    Returns:
        (ranks path, friedman path)
    """
    output_dir = Path(output_dir)
    ranks = pd.DataFrame(result.row_ranks, index=matrix.experiments, columns=matrix.methods)
    ranks.loc["average"] = [result.avg_ranks[m] for m in matrix.methods]
    ranks.index.name = "experiment"
    ranks_path = output_dir / "ranks.csv"
    friedman_path = output_dir / "friedman.json"
    try:
        output_dir.mkdir(parents=True, exist_ok=True)
        ranks.to_csv(ranks_path)
        friedman_path.write_text(json.dumps(result.to_dict(), indent=2), encoding="utf-8")
    except OSError as exc:
        raise RunIOError("cannot write analysis output", output_dir) from exc
    logger.info(f"Friedman statistic {result.statistic:.4f}, CD {result.critical_difference:.4f}")
    return ranks_path, friedman_path


def timing_row(round_index: int, wall_ms: float, eval_ms: float) -> dict[str, Any]:
    """One ``timings.jsonl`` row; ``wall_ms`` covers training, defense and aggregation only."""
    return {"round": round_index, "wall_ms": round(wall_ms, 3), "eval_ms": round(eval_ms, 3)}


def mean_round_ms(timings: Sequence[dict[str, Any]]) -> float:
    """Mean wall time per round from ``timings.jsonl`` rows."""
    if not timings:
        return 0.0
    return float(np.mean([row["wall_ms"] for row in timings]))
