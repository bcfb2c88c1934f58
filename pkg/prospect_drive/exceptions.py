"""
Prospect Drive - Exceptions
Error hierarchy shared by the library and the command-line interface.
"""

from enum import Enum
from typing import Any, Dict, Optional


class ErrorCode(str, Enum):
    """Stable error codes surfaced in messages and CLI output"""
    UNKNOWN_ERROR = "UNKNOWN_ERROR"
    VALIDATION_ERROR = "VALIDATION_ERROR"
    NO_CROSSING = "NO_CROSSING"
    NOT_APPROACHING = "NOT_APPROACHING"
    WINDOW_TOO_LONG = "WINDOW_TOO_LONG"
    LENGTH_MISMATCH = "LENGTH_MISMATCH"
    INCONSISTENT_PAIR = "INCONSISTENT_PAIR"
    INFEASIBLE_START = "INFEASIBLE_START"
    NON_CONVERGENCE = "NON_CONVERGENCE"
    UNSORTED_PROSPECT = "UNSORTED_PROSPECT"
    NEGATIVE_UTILITY = "NEGATIVE_UTILITY"
    EMPTY_CANDIDATES = "EMPTY_CANDIDATES"
    EMPTY_DATASET = "EMPTY_DATASET"
    UNLABELED_FRAME = "UNLABELED_FRAME"
    PARSE_ERROR = "PARSE_ERROR"
    SCHEMA_ERROR = "SCHEMA_ERROR"


# CLI exit codes
EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_INPUT_ERROR = 2
EXIT_NON_CONVERGENCE = 3


class ProspectDriveError(Exception):
    """Base exception for all prospect_drive errors"""

    exit_code: int = EXIT_FAILURE

    def __init__(
        self,
        message: str,
        code: Optional[ErrorCode] = None,
        details: Optional[Dict[str, Any]] = None,
    ):
        super().__init__(message)
        self.message = message
        self.code = code or ErrorCode.UNKNOWN_ERROR
        self.details = details or {}

    def __str__(self) -> str:
        return f"[{self.code.value}] {self.message}"

    def to_dict(self) -> Dict[str, Any]:
        return {"code": self.code.value, "message": self.message, "details": self.details}


class InputError(ProspectDriveError):
    """Errors caused by invalid arguments or input data"""

    exit_code = EXIT_INPUT_ERROR


class ValidationError(InputError):
    """Raised when a value violates a documented precondition"""

    def __init__(self, message: str, field: Optional[str] = None):
        super().__init__(
            message,
            code=ErrorCode.VALIDATION_ERROR,
            details={"field": field} if field else {},
        )
        self.field = field


class NoCrossingError(InputError):
    """Raised when two reference paths never intersect"""

    def __init__(self, path_a: str = "a", path_b: str = "b"):
        super().__init__(
            f"Reference paths '{path_a}' and '{path_b}' do not intersect",
            code=ErrorCode.NO_CROSSING,
            details={"path_a": path_a, "path_b": path_b},
        )


class NotApproachingError(ProspectDriveError):
    """Raised when TTC is undefined: vehicle stopped or already past the crossing"""

    def __init__(self, station: float, speed: float):
        super().__init__(
            f"Vehicle at station {station:.3f} m with speed {speed:.4f} m/s is not approaching the crossing",
            code=ErrorCode.NOT_APPROACHING,
            details={"station": station, "speed": speed},
        )
        self.station = station
        self.speed = speed


class WindowTooLongError(InputError):
    """Raised when a frame window exceeds the pair length"""

    def __init__(self, window: int, length: int):
        super().__init__(
            f"Window of {window} samples exceeds pair length {length}",
            code=ErrorCode.WINDOW_TOO_LONG,
            details={"window": window, "length": length},
        )


class LengthMismatchError(InputError):
    """Raised when two trajectories that must align have different lengths"""

    def __init__(self, expected: int, actual: int):
        super().__init__(
            f"Trajectory lengths differ: {expected} vs {actual}",
            code=ErrorCode.LENGTH_MISMATCH,
            details={"expected": expected, "actual": actual},
        )


class InconsistentPairError(InputError):
    """Raised when the two trajectories of a pair disagree on length or sampling"""

    def __init__(self, pair_id: str, reason: str):
        super().__init__(
            f"Pair '{pair_id}' is inconsistent: {reason}",
            code=ErrorCode.INCONSISTENT_PAIR,
            details={"pair_id": pair_id, "reason": reason},
        )
        self.pair_id = pair_id


class InfeasibleStartError(InputError):
    """Raised when a yield trajectory starts beyond its stop bound"""

    def __init__(self, station: float, stop_station: float):
        super().__init__(
            f"Initial station {station:.3f} m is past the stop bound {stop_station:.3f} m",
            code=ErrorCode.INFEASIBLE_START,
            details={"station": station, "stop_station": stop_station},
        )


class NonConvergenceError(ProspectDriveError):
    """Raised when an optimizer gives up before reaching its tolerance"""

    exit_code = EXIT_NON_CONVERGENCE

    def __init__(self, optimizer: str, iterations: int, reason: str = ""):
        message = f"{optimizer} did not converge after {iterations} iterations"
        if reason:
            message = f"{message}: {reason}"
        super().__init__(
            message,
            code=ErrorCode.NON_CONVERGENCE,
            details={"optimizer": optimizer, "iterations": iterations},
        )


class UnsortedProspectError(InputError):
    """Raised when prospect outcomes are not in ascending utility order"""

    def __init__(self, index: int):
        super().__init__(
            f"Prospect outcomes are not sorted ascending at position {index}",
            code=ErrorCode.UNSORTED_PROSPECT,
            details={"index": index},
        )


class NegativeUtilityError(InputError):
    """Raised when a driving utility leaves the gains-only regime"""

    def __init__(self, name: str, value: float):
        super().__init__(
            f"Utility '{name}' is negative ({value!r}); driving values require gains only",
            code=ErrorCode.NEGATIVE_UTILITY,
            details={"name": name, "value": value},
        )


class EmptyCandidatesError(InputError):
    """Raised when a demonstration has no candidate trajectories"""

    def __init__(self, demo_index: int):
        super().__init__(
            f"Demonstration {demo_index} has an empty candidate set",
            code=ErrorCode.EMPTY_CANDIDATES,
            details={"demo_index": demo_index},
        )


class EmptyDatasetError(InputError):
    """Raised when a fit or evaluation receives no samples"""

    def __init__(self, what: str = "dataset"):
        super().__init__(
            f"Cannot proceed with an empty {what}",
            code=ErrorCode.EMPTY_DATASET,
            details={"what": what},
        )


class UnlabeledFrameError(InputError):
    """Raised when evaluation meets a frame without a label"""

    def __init__(self, pair_id: str, start: int):
        super().__init__(
            f"Frame {start} of pair '{pair_id}' has no label",
            code=ErrorCode.UNLABELED_FRAME,
            details={"pair_id": pair_id, "start": start},
        )


class ParseError(InputError):
    """Raised when a CSV cell cannot be parsed"""

    def __init__(self, source: str, row: int, column: str, value: Any):
        super().__init__(
            f"{source}: cannot parse row {row}, column '{column}' (value {value!r})",
            code=ErrorCode.PARSE_ERROR,
            details={"source": source, "row": row, "column": column},
        )
        self.row = row
        self.column = column


class SchemaError(InputError):
    """Raised when a CSV lacks a required column"""

    def __init__(self, source: str, column: str):
        super().__init__(
            f"{source}: missing required column '{column}'",
            code=ErrorCode.SCHEMA_ERROR,
            details={"source": source, "column": column},
        )
        self.column = column


class DegenerateLabelsWarning(UserWarning):
    """Only one decision class is present in a fitting set"""
