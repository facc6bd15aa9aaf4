"""Utilities package for the simulation framework."""
from .exceptions import (
    AggregationError,
    AnalysisError,
    ClientTrainingError,
    ConfigurationError,
    DatasetFormatError,
    DefenseError,
    EvaluationError,
    FedNIAError,
    InputError,
    RunIOError,
    ShapeError,
    SpecError,
    TrainingDivergenceError,
)
from .logger import RunLogCapture, get_logger
from .seeding import derive_seed, make_rng

__all__ = [
    "get_logger",
    "RunLogCapture",
    "derive_seed",
    "make_rng",
    "FedNIAError",
    "ConfigurationError",
    "ShapeError",
    "InputError",
    "SpecError",
    "DatasetFormatError",
    "TrainingDivergenceError",
    "ClientTrainingError",
    "AggregationError",
    "DefenseError",
    "EvaluationError",
    "AnalysisError",
    "RunIOError",
]
