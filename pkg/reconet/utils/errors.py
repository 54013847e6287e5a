# reconet/utils/errors.py
from typing import Any, Dict, Optional


def create_error_response(
    message: str,
    details: Optional[str] = None,
    example: Optional[str] = None
) -> Dict[str, Any]:
    """Create a detailed error response"""
    response = {
        "message": message,
        "details": details if details else message
    }
    if example:
        response["example"] = example
    return response


class ReconetError(Exception):
    """Base error; carries the same message/details/example triple everywhere."""

    def __init__(self, message: str, details: Optional[str] = None, example: Optional[str] = None):
        super().__init__(message)
        self.message = message
        self.details = details
        self.example = example

    def to_dict(self) -> Dict[str, Any]:
        return create_error_response(self.message, self.details, self.example)

    def __str__(self) -> str:
        if self.details and self.details != self.message:
            return f"{self.message}: {self.details}"
        return self.message


class ShapeError(ReconetError):
    pass


class TapeError(ReconetError):
    pass


class FlowFormatError(ReconetError):
    pass


class CheckpointError(ReconetError):
    pass


class ConfigError(ReconetError):
    pass


class DatasetError(ReconetError):
    pass


class NumericError(ReconetError):
    pass
