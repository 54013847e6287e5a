# reconet/stylenet/network.py
from typing import Dict, List, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, model_validator

from reconet.engine import ops
from reconet.engine.tensor import DEFAULT_DTYPE, Tensor
from reconet.utils.errors import ShapeError

FEATURE_CHANNELS = 192
RESIDUAL_BLOCKS = 4
DOWNSAMPLE = 4

# (name, in channels, out channels, kernel, stride)
ENCODER_CONVS = [
    ("conv1", 3, 48, 9, 1),
    ("conv2", 48, 96, 3, 2),
    ("conv3", 96, FEATURE_CHANNELS, 3, 2),
]
# Each decoder conv follows a nearest 2x up-sample
DECODER_CONVS = [
    ("up1", FEATURE_CHANNELS, 96, 3),
    ("up2", 96, 48, 3),
]
OUTPUT_CONV = ("out", 48, 3, 9)

Manifest = List[Tuple[str, Tuple[int, ...]]]


def _conv_entries(prefix: str, c_in: int, c_out: int, k: int, norm: bool = True) -> Manifest:
    entries = [(f"{prefix}.weight", (c_out, c_in, k, k)), (f"{prefix}.bias", (c_out,))]
    if norm:
        entries += [(f"{prefix}.norm.scale", (c_out,)), (f"{prefix}.norm.shift", (c_out,))]
    return entries


def encoder_manifest() -> Manifest:
    entries: Manifest = []
    for name, c_in, c_out, k, _ in ENCODER_CONVS:
        entries += _conv_entries(f"encoder.{name}", c_in, c_out, k)
    for block in range(1, RESIDUAL_BLOCKS + 1):
        for half in ("conv_a", "conv_b"):
            entries += _conv_entries(f"encoder.res{block}.{half}", FEATURE_CHANNELS, FEATURE_CHANNELS, 3)
    return entries


def decoder_manifest() -> Manifest:
    entries: Manifest = []
    for name, c_in, c_out, k in DECODER_CONVS:
        entries += _conv_entries(f"decoder.{name}", c_in, c_out, k)
    name, c_in, c_out, k = OUTPUT_CONV
    entries += _conv_entries(f"decoder.{name}", c_in, c_out, k, norm=False)
    return entries


def layer_manifest() -> Manifest:
    """Every trainable tensor of the encoder/decoder, in checkpoint order."""
    return encoder_manifest() + decoder_manifest()


def parameter_count() -> int:
    return int(sum(np.prod(shape) for _, shape in layer_manifest()))


def _check_against(manifest: Manifest, tensors: Dict[str, Tensor], group: str) -> None:
    expected = dict(manifest)
    for name in tensors:
        if name not in expected:
            raise ValueError(f"{group}: unexpected layer '{name}'")
    for name, shape in manifest:
        if name not in tensors:
            raise ValueError(f"{group}: missing layer '{name}'")
        if tensors[name].shape != shape:
            raise ValueError(f"{group}: layer '{name}' has shape {tensors[name].shape}, expected {shape}")


class EncoderParams(BaseModel):
    tensors: Dict[str, Tensor]

    model_config = ConfigDict(arbitrary_types_allowed=True)

    @model_validator(mode="after")
    def check_manifest(self):
        _check_against(encoder_manifest(), self.tensors, "encoder")
        return self


class DecoderParams(BaseModel):
    tensors: Dict[str, Tensor]

    model_config = ConfigDict(arbitrary_types_allowed=True)

    @model_validator(mode="after")
    def check_manifest(self):
        _check_against(decoder_manifest(), self.tensors, "decoder")
        return self


def _conv_norm(x: Tensor, p: Dict[str, Tensor], prefix: str, stride: int = 1) -> Tensor:
    y = ops.conv2d(x, p[f"{prefix}.weight"], p[f"{prefix}.bias"], stride=stride)
    return ops.instance_norm(y, p[f"{prefix}.norm.scale"], p[f"{prefix}.norm.shift"])


def encode(frame: Tensor, params: EncoderParams) -> Tensor:
    """(3, H, W) frame in [0, 1] -> (192, H/4, W/4) features."""
    if frame.ndim != 3 or frame.shape[0] != 3:
        raise ShapeError(message="encode: expected a (3, H, W) frame", details=f"got shape {frame.shape}")
    _, height, width = frame.shape
    if height % DOWNSAMPLE or width % DOWNSAMPLE:
        raise ShapeError(
            message="encode: spatial size not divisible by 4",
            details=f"frame is {width}x{height}",
            example="Resize frames to e.g. 640x360"
        )
    p = params.tensors
    x = frame
    for name, _, _, _, stride in ENCODER_CONVS:
        x = ops.relu(_conv_norm(x, p, f"encoder.{name}", stride))
    for block in range(1, RESIDUAL_BLOCKS + 1):
        prefix = f"encoder.res{block}"
        y = ops.relu(_conv_norm(x, p, f"{prefix}.conv_a"))
        y = _conv_norm(y, p, f"{prefix}.conv_b")
        x = ops.relu(ops.add(x, y))
    return x


# tanh output in [-1, 1] mapped to image range by (x + 1) / 2
_TO_UNIT_RANGE = (0.5 * np.eye(3), np.full(3, 0.5))


def decode(features: Tensor, params: DecoderParams) -> Tensor:
    """(192, h, w) features -> (3, 4h, 4w) image in [0, 1]."""
    if features.ndim != 3 or features.shape[0] != FEATURE_CHANNELS:
        raise ShapeError(
            message="decode: expected (192, h, w) features",
            details=f"dimension C: got shape {features.shape}"
        )
    p = params.tensors
    x = features
    for name, _, _, _ in DECODER_CONVS:
        x = ops.relu(_conv_norm(ops.upsample_nearest2x(x), p, f"decoder.{name}"))
    name = OUTPUT_CONV[0]
    x = ops.tanh(ops.conv2d(x, p[f"decoder.{name}.weight"], p[f"decoder.{name}.bias"]))
    matrix, offset = _TO_UNIT_RANGE
    return ops.channel_mix(x, matrix, offset)


def _init_tensor(rng: np.random.Generator, name: str, shape: Tuple[int, ...], fan_in: int, dtype) -> np.ndarray:
    if name.endswith(".norm.scale"):
        return np.ones(shape, dtype=dtype)
    if name.endswith(".norm.shift"):
        return np.zeros(shape, dtype=dtype)
    if name.endswith(".weight"):
        bound = np.sqrt(6.0 / fan_in)
    else:
        bound = 1.0 / np.sqrt(fan_in)
    return rng.uniform(-bound, bound, size=shape).astype(dtype)


def init_parameters(seed: int, dtype=DEFAULT_DTYPE) -> Dict[str, Tensor]:
    """Kaiming-style uniform fan-in init from a seeded generator, in manifest order."""
    rng = np.random.default_rng(seed)
    tensors: Dict[str, Tensor] = {}
    fan_in = 1
    for name, shape in layer_manifest():
        if name.endswith(".weight"):
            fan_in = int(np.prod(shape[1:]))
        tensors[name] = Tensor(_init_tensor(rng, name, shape, fan_in, dtype), requires_grad=True, name=name, dtype=dtype)
    return tensors


class ReCoNet:
    """Encoder + decoder; the only parts used at inference."""

    def __init__(self, encoder: EncoderParams, decoder: DecoderParams):
        self.encoder = encoder
        self.decoder = decoder

    @classmethod
    def from_tensors(cls, tensors: Dict[str, Tensor]) -> "ReCoNet":
        encoder = {k: v for k, v in tensors.items() if k.startswith("encoder.")}
        decoder = {k: v for k, v in tensors.items() if k.startswith("decoder.")}
        stray = sorted(set(tensors) - set(encoder) - set(decoder))
        if stray:
            raise ShapeError(message="Unknown layers", details=f"not part of the encoder/decoder: {', '.join(stray)}")
        return cls(EncoderParams(tensors=encoder), DecoderParams(tensors=decoder))

    @classmethod
    def initialize(cls, seed: int = 0, dtype=DEFAULT_DTYPE) -> "ReCoNet":
        return cls.from_tensors(init_parameters(seed, dtype))

    def parameters(self) -> Dict[str, Tensor]:
        merged = {**self.encoder.tensors, **self.decoder.tensors}
        return {name: merged[name] for name, _ in layer_manifest()}

    def astype(self, dtype) -> "ReCoNet":
        return ReCoNet.from_tensors({name: t.astype(dtype) for name, t in self.parameters().items()})

    def zero_grad(self) -> None:
        for tensor in self.parameters().values():
            tensor.zero_grad()

    def encode(self, frame: Tensor) -> Tensor:
        return encode(frame, self.encoder)

    def decode(self, features: Tensor) -> Tensor:
        return decode(features, self.decoder)

    def stylize(self, frame: Tensor) -> Tensor:
        return self.decode(self.encode(frame))

    def stylize_array(self, frame: np.ndarray) -> np.ndarray:
        """Inference on a plain (3, H, W) array; records nothing unless a tape is open."""
        return self.stylize(Tensor(frame, dtype=self.parameters()["encoder.conv1.weight"].dtype)).data
