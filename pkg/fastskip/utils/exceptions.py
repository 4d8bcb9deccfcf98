"""Custom exceptions for fastskip."""

from typing import Any, Dict, Optional


class FastSkipError(Exception):
    """Base exception for all fastskip errors."""

    def __init__(
        self,
        message: str,
        error_code: Optional[str] = None,
        details: Optional[Dict[str, Any]] = None,
    ):
        super().__init__(message)
        self.message = message
        self.error_code = error_code
        self.details = details or {}

    def __str__(self) -> str:
        if self.error_code:
            return f"[{self.error_code}] {self.message}"
        return self.message


class ConfigurationError(FastSkipError, ValueError):
    """Raised when configuration is invalid or missing."""

    def __init__(
        self, message: str, config_key: Optional[str] = None, **kwargs: Any
    ) -> None:
        details = kwargs.get("details", {})
        if config_key:
            details["config_key"] = config_key

        super().__init__(message, error_code="CONFIGURATION_ERROR", details=details)
        self.config_key = config_key


class LatticeShapeError(FastSkipError, ValueError):
    """Raised when node probabilities do not match the declared (T, U)."""

    def __init__(
        self,
        message: str,
        expected: Optional[tuple] = None,
        actual: Optional[tuple] = None,
        **kwargs: Any,
    ) -> None:
        details = kwargs.get("details", {})
        if expected is not None:
            details["expected"] = list(expected)
        if actual is not None:
            details["actual"] = list(actual)

        super().__init__(message, error_code="LATTICE_SHAPE_ERROR", details=details)
        self.expected = expected
        self.actual = actual


class LatticeIndexError(FastSkipError, IndexError):
    """Raised when a lattice node (t, u) lies outside the grid."""

    def __init__(self, t: int, u: int, T: int, U: int, **kwargs: Any) -> None:
        message = f"Node ({t}, {u}) outside lattice 1..{T} x 0..{U}"
        details = kwargs.get("details", {})
        details.update({"t": t, "u": u, "T": T, "U": U})

        super().__init__(message, error_code="LATTICE_INDEX_ERROR", details=details)
        self.t = t
        self.u = u


class PathEnumerationError(FastSkipError):
    """Raised when brute-force path enumeration is asked for a large lattice."""

    def __init__(self, T: int, U: int, limit: int, **kwargs: Any) -> None:
        message = f"Refusing to enumerate paths for T+U={T + U} (limit {limit})"
        details = kwargs.get("details", {})
        details.update({"T": T, "U": U, "limit": limit})

        super().__init__(
            message, error_code="PATH_ENUMERATION_REFUSED", details=details
        )


class CtcInfeasibleError(FastSkipError):
    """Raised when a target cannot be aligned to the available CTC frames."""

    def __init__(self, frames: int, required: int, **kwargs: Any) -> None:
        message = f"CTC needs at least {required} frames, got {frames}"
        details = kwargs.get("details", {})
        details.update({"frames": frames, "required": required})

        super().__init__(message, error_code="CTC_INFEASIBLE", details=details)
        self.frames = frames
        self.required = required


class EmptyUtteranceError(FastSkipError, ValueError):
    """Raised when an utterance has no feature frames."""

    def __init__(self, message: str = "Utterance has no frames", **kwargs: Any):
        super().__init__(
            message, error_code="EMPTY_UTTERANCE", details=kwargs.get("details")
        )


class UnknownTokenError(FastSkipError, ValueError):
    """Raised when a token id is outside the model vocabulary."""

    def __init__(self, token: int, vocab_size: int, **kwargs: Any) -> None:
        message = f"Unknown token id {token} (valid ids 0..{vocab_size})"
        details = kwargs.get("details", {})
        details.update({"token": token, "vocab_size": vocab_size})

        super().__init__(message, error_code="UNKNOWN_TOKEN", details=details)
        self.token = token


class NonFiniteLossError(FastSkipError, ValueError):
    """Raised when a term of the joint objective is NaN or infinite."""

    def __init__(self, term: str, value: float, **kwargs: Any) -> None:
        message = f"{term} loss is not finite: {value}"
        details = kwargs.get("details", {})
        details.update({"term": term, "value": repr(value)})

        super().__init__(message, error_code="NON_FINITE_LOSS", details=details)
        self.term = term


class TrainingDivergedError(FastSkipError):
    """Raised when the training objective stops being finite."""

    def __init__(
        self,
        step: int,
        message: Optional[str] = None,
        last_record: Optional[Dict[str, Any]] = None,
        **kwargs: Any,
    ) -> None:
        if message is None:
            message = f"Non-finite loss at step {step}"
        details = kwargs.get("details", {})
        details["step"] = step
        if last_record:
            details["last_record"] = last_record

        super().__init__(message, error_code="TRAINING_DIVERGED", details=details)
        self.step = step
        self.last_record = last_record


class FileFormatError(FastSkipError):
    """Raised when a dataset or checkpoint file has the wrong magic/version."""

    def __init__(self, message: str, path: Optional[str] = None, **kwargs: Any):
        details = kwargs.get("details", {})
        if path:
            details["path"] = path

        super().__init__(message, error_code="FORMAT_ERROR", details=details)
        self.path = path


class CorruptFileError(FastSkipError):
    """Raised when a dataset or checkpoint file is truncated or has extra bytes."""

    def __init__(self, message: str, path: Optional[str] = None, **kwargs: Any):
        details = kwargs.get("details", {})
        if path:
            details["path"] = path

        super().__init__(message, error_code="CORRUPT_FILE", details=details)
        self.path = path


class CheckpointMismatchError(FastSkipError):
    """Raised when a checkpoint does not fit the configured task or data."""

    def __init__(self, field: str, checkpoint_value: Any, expected: Any, **kwargs):
        message = (
            f"Checkpoint {field}={checkpoint_value} does not match expected {expected}"
        )
        details = kwargs.get("details", {})
        details.update(
            {"field": field, "checkpoint": checkpoint_value, "expected": expected}
        )

        super().__init__(message, error_code="CHECKPOINT_MISMATCH", details=details)
        self.field = field


class UndefinedCerError(FastSkipError):
    """Raised when the evaluation set has zero total reference length."""

    def __init__(self, message: str = "CER undefined: total reference length is 0"):
        super().__init__(message, error_code="UNDEFINED_CER")

