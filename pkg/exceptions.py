"""
State-Aliasing Lab - Custom Exceptions
Structured error handling shared by the simulator, data pipeline, training and CLI
"""

import logging
from typing import Any, Dict, Optional

logger = logging.getLogger(__name__)


class LabError(Exception):
    """Base exception for all lab errors"""

    def __init__(self, message: str, details: Optional[Dict[str, Any]] = None):
        super().__init__(message)
        self.message = message
        self.details = details or {}

    def to_dict(self) -> Dict[str, Any]:
        """Convert exception to dictionary for JSON run reports"""
        return {"error": self.__class__.__name__, "message": self.message, "details": self.details}


class ConfigurationError(LabError):
    """Raised when configuration is invalid or missing"""

    def __init__(self, config_key: str, reason: str):
        message = f"Configuration error for '{config_key}': {reason}"
        details = {"config_key": config_key, "reason": reason}
        super().__init__(message, details)
        self.config_key = config_key


class InputError(LabError):
    """Raised when an operation receives an invalid input value"""

    def __init__(self, field: str, value: Any, constraints: str):
        message = f"Invalid input for '{field}': {constraints}"
        details = {"field": field, "value": repr(value), "constraints": constraints}
        super().__init__(message, details)
        self.field = field


class ActionIndexError(LabError):
    """Raised when a sample index falls outside the trajectory"""

    def __init__(self, index: int, horizon: int, length: int):
        message = f"Index t={index} with horizon {horizon} is out of range for length {length}"
        details = {"index": index, "horizon": horizon, "length": length}
        super().__init__(message, details)
        self.index = index


class TaskInfeasibleError(LabError):
    """Raised when the scripted expert cannot reach the instructed goal"""

    def __init__(self, instruction: str, reason: str):
        message = f"Task '{instruction}' is infeasible: {reason}"
        super().__init__(message, {"instruction": instruction, "reason": reason})
        self.instruction = instruction


class UnknownInstructionError(LabError):
    """Raised when an instruction is outside the closed vocabulary"""

    def __init__(self, instruction: str):
        message = f"Unknown instruction: {instruction}"
        super().__init__(message, {"instruction": instruction})
        self.instruction = instruction


class DatasetError(LabError):
    """Raised when a dataset is empty, too small or cannot be produced"""


class RecordFormatError(LabError):
    """Raised when a binary record cannot be parsed"""

    def __init__(self, path: str, reason: str):
        message = f"Malformed record {path}: {reason}"
        super().__init__(message, {"path": path, "reason": reason})
        self.path = path


class FormatVersionError(RecordFormatError):
    """Raised when a record carries an unknown magic or format version"""


class TruncatedRecordError(RecordFormatError):
    """Raised when a record ends before its declared payload"""


class ChecksumError(RecordFormatError):
    """Raised when a record payload does not match its digest"""


class DivergenceError(LabError):
    """Raised when training produces a non-finite loss"""

    def __init__(self, step: int, components: Dict[str, float]):
        message = f"Non-finite loss at step {step}: {components}"
        super().__init__(message, {"step": step, **components})
        self.step = step


class UndefinedResultError(LabError):
    """Raised when a statistic is undefined for the given inputs"""


class FrozenEncoderError(LabError):
    """Raised when a frozen encoder's parameters change during probing"""

    def __init__(self, before: str, after: str):
        message = "Encoder parameters changed during probe training"
        super().__init__(message, {"digest_before": before, "digest_after": after})


# Process exit codes: 0 success, 1 any failed run, 2 usage errors from argparse
FAILURE_EXIT_CODE = 1
USAGE_EXIT_CODE = 2


def get_exit_code(exception: BaseException) -> int:
    """Get the process exit code for an exception that ended a run.

    Lab errors and unexpected exceptions share one code; the class name on
    the diagnostic line tells them apart.
    """
    return FAILURE_EXIT_CODE


def format_error_line(exception: BaseException) -> str:
    """Format exception as a one-line CLI diagnostic"""
    if isinstance(exception, LabError):
        return f"error: {exception.__class__.__name__}: {exception.message}"
    return f"error: {exception}"


def log_exception(exception: BaseException, context: Optional[Dict[str, Any]] = None) -> None:
    """Log exception with context information"""
    context = context or {}

    if isinstance(exception, LabError):
        if isinstance(exception, (ConfigurationError, InputError, UnknownInstructionError)):
            # Caller errors
            logger.info(
                f"{exception.__class__.__name__}: {exception.message}",
                extra={"details": exception.details, **context},
            )
        elif isinstance(exception, (DatasetError, TaskInfeasibleError, UndefinedResultError)):
            logger.warning(
                f"{exception.__class__.__name__}: {exception.message}",
                extra={"details": exception.details, **context},
            )
        else:
            logger.error(
                f"{exception.__class__.__name__}: {exception.message}",
                extra={"details": exception.details, **context},
            )
    else:
        logger.error(f"Unexpected exception: {str(exception)}", exc_info=True, extra=context)
