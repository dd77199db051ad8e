"""Exception hierarchy shared by every mobisearch module.

Each exception carries a machine-readable ``code`` and the process exit code
the CLI uses when it reaches the top level: 2 for validation problems, 3 for
runtime failures.
"""

from __future__ import annotations

from typing import Any


class MobiSearchError(Exception):
    """Base class for all mobisearch errors."""

    code = "RUNTIME_ERROR"
    exit_code = 3

    def __init__(self, message: str, **details: Any) -> None:
        super().__init__(message)
        self.details = details

    def to_envelope(self) -> dict[str, Any]:
        error: dict[str, Any] = {"code": self.code, "message": str(self)}
        if self.details:
            error["details"] = self.details
        return {"ok": False, "error": error}


class ValidationFailure(MobiSearchError):
    """Input or configuration did not satisfy a precondition."""

    code = "VALIDATION_ERROR"
    exit_code = 2


class InputFormatError(ValidationFailure):
    """Malformed file: wrong header, bad line layout, inconsistent vectors."""

    code = "INPUT_FORMAT_ERROR"


class MissingResourceError(ValidationFailure):
    """A referenced file or directory does not exist."""

    code = "MISSING_RESOURCE"


class UnsortedInputError(ValidationFailure):
    code = "UNSORTED_INPUT"


class EmptyInputError(ValidationFailure):
    code = "EMPTY_INPUT"


class ShapeError(ValidationFailure):
    code = "SHAPE_MISMATCH"


class UnknownAppError(ValidationFailure):
    code = "UNKNOWN_APP"


class TrainingDivergedError(MobiSearchError):
    """Loss became NaN or infinite during training."""

    code = "TRAINING_DIVERGED"


class NonFiniteGradientError(MobiSearchError):
    """An optimizer step saw a NaN or infinite gradient."""

    code = "NON_FINITE_GRADIENT"

    def __init__(self, parameter: str) -> None:
        super().__init__(
            f"Non-finite gradient for parameter '{parameter}'", parameter=parameter
        )
        self.parameter = parameter


def _subclasses(cls: type[MobiSearchError]) -> list[type[MobiSearchError]]:
    found = [cls]
    for sub in cls.__subclasses__():
        found.extend(_subclasses(sub))
    return found


def exit_code_for(envelope: dict[str, Any]) -> int:
    """Process exit code for a handler envelope: 0 ok, 2 validation, 3 runtime."""
    if envelope.get("ok"):
        return 0
    code = envelope.get("error", {}).get("code")
    for cls in _subclasses(MobiSearchError):
        if cls.code == code:
            return cls.exit_code
    return MobiSearchError.exit_code
