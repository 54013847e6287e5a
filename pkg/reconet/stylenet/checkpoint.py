# reconet/stylenet/checkpoint.py
"""RCNT container: magic "RCNT", u32 version, u32 layer count, per layer
(u32 name length, UTF-8 name, u32 rank, u32 dims...), concatenated
little-endian float32 payload, then a u32-length-prefixed block of UTF-8
key=value lines."""
import os
import struct
from pathlib import Path
from typing import Dict, Tuple

import numpy as np
from pydantic import ValidationError

from reconet.engine.tensor import Tensor
from reconet.utils.errors import CheckpointError

from .network import ReCoNet, layer_manifest

MAGIC = b"RCNT"
VERSION = 1


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.offset = 0

    def take(self, count: int, what: str) -> bytes:
        if self.offset + count > len(self.data):
            raise CheckpointError(
                message="Truncated checkpoint",
                details=f"unexpected end of data while reading {what} at byte {self.offset}"
            )
        chunk = self.data[self.offset:self.offset + count]
        self.offset += count
        return chunk

    def u32(self, what: str) -> int:
        return struct.unpack("<I", self.take(4, what))[0]


def write_container(arrays: Dict[str, np.ndarray], metadata: Dict[str, str]) -> bytes:
    parts = [MAGIC, struct.pack("<II", VERSION, len(arrays))]
    for name, array in arrays.items():
        encoded = name.encode("utf-8")
        parts.append(struct.pack("<I", len(encoded)) + encoded)
        parts.append(struct.pack(f"<I{array.ndim}I", array.ndim, *array.shape))
    for array in arrays.values():
        parts.append(np.ascontiguousarray(array, dtype="<f4").tobytes())
    lines = []
    for key, value in metadata.items():
        if "=" in key or "\n" in key or "\n" in str(value):
            raise CheckpointError(message="Invalid metadata entry", details=f"'{key}' cannot be stored as a key=value line")
        lines.append(f"{key}={value}\n")
    block = "".join(lines).encode("utf-8")
    parts.append(struct.pack("<I", len(block)) + block)
    return b"".join(parts)


def read_container(data: bytes) -> Tuple[Dict[str, np.ndarray], Dict[str, str]]:
    reader = _Reader(data)
    if reader.take(4, "magic") != MAGIC:
        raise CheckpointError(
            message="Corrupt checkpoint header",
            details="missing RCNT magic",
            example="Checkpoints are written by reconet train"
        )
    version = reader.u32("version")
    if version != VERSION:
        raise CheckpointError(
            message="Unsupported checkpoint version",
            details=f"file version {version}, this build reads version {VERSION}"
        )
    count = reader.u32("layer count")
    manifest = []
    for _ in range(count):
        try:
            name = reader.take(reader.u32("name length"), "layer name").decode("utf-8")
        except UnicodeDecodeError as e:
            raise CheckpointError(message="Corrupt checkpoint header", details=f"layer name is not UTF-8: {e}") from e
        rank = reader.u32(f"rank of '{name}'")
        shape = struct.unpack(f"<{rank}I", reader.take(4 * rank, f"dims of '{name}'"))
        manifest.append((name, shape))
    arrays: Dict[str, np.ndarray] = {}
    for name, shape in manifest:
        size = int(np.prod(shape)) if shape else 1
        raw = reader.take(4 * size, f"payload of '{name}'")
        arrays[name] = np.frombuffer(raw, dtype="<f4").reshape(shape).astype(np.float32)
    block = reader.take(reader.u32("metadata length"), "metadata")
    if reader.offset != len(data):
        raise CheckpointError(message="Corrupt checkpoint", details=f"{len(data) - reader.offset} trailing bytes")
    metadata: Dict[str, str] = {}
    for line in block.decode("utf-8").splitlines():
        if line:
            key, _, value = line.partition("=")
            metadata[key] = value
    return arrays, metadata


def check_layer_manifest(arrays: Dict[str, np.ndarray]) -> None:
    """Layer names, order and shapes must match the network manifest exactly."""
    expected = layer_manifest()
    names = list(arrays)
    for name, shape in expected:
        if name not in arrays:
            raise CheckpointError(message="Checkpoint manifest mismatch", details=f"missing layer '{name}'")
        if tuple(arrays[name].shape) != shape:
            raise CheckpointError(
                message="Checkpoint manifest mismatch",
                details=f"layer '{name}' has shape {tuple(arrays[name].shape)}, the network requires {shape}"
            )
    extra = [n for n in names if n not in dict(expected)]
    if extra:
        raise CheckpointError(message="Checkpoint manifest mismatch", details=f"unexpected layers: {', '.join(extra)}")
    if names != [name for name, _ in expected]:
        raise CheckpointError(message="Checkpoint manifest mismatch", details="layers are out of order")


def save_checkpoint(model: ReCoNet, metadata: Dict[str, str]) -> bytes:
    arrays = {name: t.data for name, t in model.parameters().items()}
    check_layer_manifest(arrays)
    return write_container(arrays, metadata)


def load_checkpoint(data: bytes) -> Tuple[ReCoNet, Dict[str, str]]:
    arrays, metadata = read_container(data)
    check_layer_manifest(arrays)
    try:
        model = ReCoNet.from_tensors({name: Tensor(a, requires_grad=True, name=name) for name, a in arrays.items()})
    except ValidationError as e:
        raise CheckpointError(message="Checkpoint manifest mismatch", details=str(e)) from e
    return model, metadata


def write_atomic(path: Path, data: bytes) -> None:
    """Write then rename, so an interrupted run never leaves a half-written file."""
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(data)
    os.replace(tmp, path)


def load_checkpoint_file(path: Path) -> Tuple[ReCoNet, Dict[str, str]]:
    path = Path(path)
    if not path.is_file():
        raise CheckpointError(message="Checkpoint not found", details=f"No checkpoint at: {path}")
    return load_checkpoint(path.read_bytes())
