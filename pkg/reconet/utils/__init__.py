# reconet/utils/__init__.py
from .errors import (
    ReconetError,
    ShapeError,
    TapeError,
    FlowFormatError,
    CheckpointError,
    ConfigError,
    DatasetError,
    NumericError,
    create_error_response,
)
