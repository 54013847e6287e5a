# reconet/flow/flo.py
"""Middlebury .flo files: float32 magic 202021.25 ("PIEH"), int32 width,
int32 height, then height*width interleaved (dx, dy) float32, little-endian."""
import logging
import struct
from pathlib import Path

import numpy as np

from reconet.models.flow import FlowField
from reconet.utils.errors import FlowFormatError

logger = logging.getLogger(__name__)

FLO_MAGIC = 202021.25
HEADER = struct.Struct("<fii")


def read_flo(data: bytes, source: str = "<bytes>") -> FlowField:
    if len(data) < 4 or struct.unpack_from("<f", data)[0] != FLO_MAGIC:
        raise FlowFormatError(
            message="not a flow file",
            details=f"{source}: missing 202021.25 magic",
            example="Middlebury .flo files start with the bytes 'PIEH'"
        )
    if len(data) < HEADER.size:
        raise FlowFormatError(message="unexpected end of data", details=f"{source}: header truncated")
    _, width, height = HEADER.unpack_from(data)
    if width <= 0 or height <= 0:
        raise FlowFormatError(message="not a flow file", details=f"{source}: invalid size {width}x{height}")
    expected = HEADER.size + 8 * width * height
    if len(data) < expected:
        raise FlowFormatError(
            message="unexpected end of data",
            details=f"{source}: {width}x{height} flow needs {expected} bytes, got {len(data)}"
        )
    if len(data) > expected:
        raise FlowFormatError(
            message="trailing data after flow payload",
            details=f"{source}: {len(data) - expected} extra bytes"
        )
    vectors = np.frombuffer(data, dtype="<f4", count=2 * width * height, offset=HEADER.size)
    flow = FlowField(vectors=vectors.reshape(height, width, 2).astype(np.float32))
    if flow.out_of_bounds():
        logger.warning(f"{source}: flow vectors exceed the frame size ({width}x{height})")
    return flow


def write_flo(flow: FlowField) -> bytes:
    return HEADER.pack(FLO_MAGIC, flow.width, flow.height) + flow.vectors.astype("<f4").tobytes()


def load_flo(path: Path) -> FlowField:
    path = Path(path)
    return read_flo(path.read_bytes(), str(path))


def save_flo(path: Path, flow: FlowField) -> None:
    Path(path).write_bytes(write_flo(flow))
