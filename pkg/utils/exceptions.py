"""
Error hierarchy shared by every package. Each class carries the CLI exit code
it maps to; only the CLI converts exceptions into exit codes.
"""
from pathlib import Path
from typing import Optional, Union


class FedNIAError(Exception):
    """Base class for all framework errors."""

    exit_code = 1


class ConfigurationError(FedNIAError):
    """Invalid configuration, model specification or partition plan."""

    exit_code = 3


class ShapeError(ConfigurationError):
    """Array dimensions disagree with the model architecture."""


class InputError(ConfigurationError):
    """Input values are not usable (non-finite, out of range)."""


class SpecError(ConfigurationError):
    """Invalid attack specification."""


class DatasetFormatError(FedNIAError):
    """Malformed IDX container."""

    exit_code = 5

    def __init__(self, message: str, path: Optional[Union[str, Path]] = None, offset: Optional[int] = None):
        self.path = str(path) if path is not None else None
        self.offset = offset
        location = ""
        if self.path is not None:
            location = f" ({self.path}"
            location += f" @ byte {offset})" if offset is not None else ")"
        elif offset is not None:
            location = f" (@ byte {offset})"
        super().__init__(f"{message}{location}")


class TrainingDivergenceError(FedNIAError):
    """Loss became non-finite during SGD."""

    exit_code = 6

    def __init__(self, message: str, epoch: int):
        self.epoch = epoch
        super().__init__(f"{message} (epoch {epoch})")


class ClientTrainingError(FedNIAError):
    """Local training failed on a specific client."""

    exit_code = 6

    def __init__(self, message: str, client_id: int):
        self.client_id = client_id
        super().__init__(f"client {client_id}: {message}")


class AggregationError(FedNIAError):
    """Aggregation could not be performed (empty or heterogeneous updates)."""

    exit_code = 6


class DefenseError(FedNIAError):
    """The detector could not be trained or applied."""

    exit_code = 6


class EvaluationError(FedNIAError):
    """Metric computation on an unusable evaluation set."""

    exit_code = 7


class AnalysisError(FedNIAError):
    """Post-hoc statistical analysis on a degenerate or inconsistent matrix."""

    exit_code = 7


class RunIOError(FedNIAError):
    """Reading or writing run artifacts failed."""

    exit_code = 4

    def __init__(self, message: str, path: Optional[Union[str, Path]] = None):
        self.path = str(path) if path is not None else None
        super().__init__(f"{message}: {self.path}" if self.path else message)
