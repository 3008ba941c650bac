"""
Error type shared by the reservoir, systems, analysis and experiment layers
"""
from typing import Any, Dict, Optional


class ReservoirError(Exception):
    """Library error carrying a category code and optional structured data"""

    # Usage and configuration failures
    CONTRACT_VIOLATION = 100
    CONFIG_INVALID = 101
    IO_FAILURE = 102

    # Numerical failures
    NON_FINITE_DRIVE = 200
    DEGENERATE_DRAW = 201
    SINGULAR_SYSTEM = 202
    DIVERGED = 203
    INSUFFICIENT_RECURRENCE = 204
    UNDETERMINED_ANGLE = 205
    EMPTY_SET = 206

    CATEGORY_NAMES = {
        CONTRACT_VIOLATION: "Contract violation",
        CONFIG_INVALID: "Invalid configuration",
        IO_FAILURE: "I/O failure",
        NON_FINITE_DRIVE: "Numerical failure",
        DEGENERATE_DRAW: "Numerical failure",
        SINGULAR_SYSTEM: "Numerical failure",
        DIVERGED: "Numerical failure",
        INSUFFICIENT_RECURRENCE: "Numerical failure",
        UNDETERMINED_ANGLE: "Numerical failure",
        EMPTY_SET: "Numerical failure",
    }

    def __init__(self, code: int, message: str, data: Optional[Any] = None):
        self.code = code
        self.message = message
        self.data = data
        super().__init__(f"{self.CATEGORY_NAMES.get(code, 'Error')} {code}: {message}")

    @property
    def exit_code(self) -> int:
        """Process exit status for this error: 1 usage/config, 2 numerical"""
        return 1 if self.code < 200 else 2

    def to_dict(self) -> Dict[str, Any]:
        """Convert error to dictionary format"""
        error_dict = {"code": self.code, "message": self.message}
        if self.data is not None:
            error_dict["data"] = self.data
        return error_dict


def require(condition: bool, message: str, data: Optional[Any] = None) -> None:
    """Raise a contract violation unless condition holds"""
    if not condition:
        raise ReservoirError(ReservoirError.CONTRACT_VIOLATION, message, data)
