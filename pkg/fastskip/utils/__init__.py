"""Utility modules for fastskip."""

from fastskip.utils.exceptions import *

__all__ = [
    "FastSkipError",
    "ConfigurationError",
    "LatticeShapeError",
    "LatticeIndexError",
    "PathEnumerationError",
    "CtcInfeasibleError",
    "EmptyUtteranceError",
    "UnknownTokenError",
    "NonFiniteLossError",
    "TrainingDivergedError",
    "FileFormatError",
    "CorruptFileError",
    "CheckpointMismatchError",
    "UndefinedCerError",
]
