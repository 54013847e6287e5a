# reconet/stylenet/backbone.py
import logging
from pathlib import Path
from typing import Dict, List, Optional, Tuple

import numpy as np
from pydantic import BaseModel

from reconet.engine import ops
from reconet.engine.tensor import DEFAULT_DTYPE, Tensor
from reconet.utils.errors import CheckpointError, ConfigError, ShapeError

logger = logging.getLogger(__name__)

STYLE_TAPS = ("relu1_2", "relu2_2", "relu3_3", "relu4_3")
CONTENT_TAP = "relu3_3"
BACKBONE_STRIDE = 8


class TapPoint(BaseModel):
    name: str
    factor: int
    channels: int


class BackboneProfile(BaseModel):
    name: str
    block_channels: Tuple[int, int, int, int]
    block_convs: Tuple[int, int, int, int]
    mean: Optional[Tuple[float, float, float]] = None
    std: Optional[Tuple[float, float, float]] = None

    def layers(self) -> List[Tuple[str, int, int]]:
        """(layer name, in channels, out channels) for every 3x3 conv, in order."""
        layers = []
        c_in = 3
        for block, (channels, convs) in enumerate(zip(self.block_channels, self.block_convs), start=1):
            for n in range(1, convs + 1):
                layers.append((f"conv{block}_{n}", c_in, channels))
                c_in = channels
        return layers

    def taps(self) -> List[TapPoint]:
        return [TapPoint(name=name, factor=2 ** i, channels=c)
                for i, (name, c) in enumerate(zip(STYLE_TAPS, self.block_channels))]


PROFILES: Dict[str, BackboneProfile] = {
    "vgg16": BackboneProfile(
        name="vgg16",
        block_channels=(64, 128, 256, 512),
        block_convs=(2, 2, 3, 3),
        mean=(0.485, 0.456, 0.406),
        std=(0.229, 0.224, 0.225),
    ),
    "test": BackboneProfile(
        name="test",
        block_channels=(8, 16, 32, 64),
        block_convs=(1, 1, 1, 1),
    ),
}


def get_profile(name: str) -> BackboneProfile:
    if name not in PROFILES:
        raise ConfigError(
            message="Unknown backbone profile",
            details=f"'{name}' is not one of: {', '.join(PROFILES)}",
            example="backbone=vgg16"
        )
    return PROFILES[name]


class PerceptualBackbone:
    """Frozen VGG-style loss network exposing relu1_2/relu2_2/relu3_3/relu4_3 taps.

    Convolutions use the same reflect padding as the transfer network; weights
    never require gradients, images may.
    """

    def __init__(self, profile: BackboneProfile, tensors: Dict[str, Tensor]):
        self.profile = profile
        for name, c_in, c_out in profile.layers():
            for suffix, shape in ((".weight", (c_out, c_in, 3, 3)), (".bias", (c_out,))):
                key = name + suffix
                if key not in tensors:
                    raise CheckpointError(message="Backbone weights incomplete", details=f"missing layer '{key}'")
                if tensors[key].shape != shape:
                    raise CheckpointError(
                        message="Backbone weights do not match the profile",
                        details=f"layer '{key}' has shape {tensors[key].shape}, expected {shape}"
                    )
        self.tensors = {k: Tensor(v.data, requires_grad=False, name=k, dtype=v.dtype) for k, v in tensors.items()}
        if profile.mean is not None:
            std = np.asarray(profile.std)
            self._normalize = (np.diag(1.0 / std), -np.asarray(profile.mean) / std)
        else:
            self._normalize = None

    @property
    def taps(self) -> List[TapPoint]:
        return self.profile.taps()

    @classmethod
    def random(cls, profile: str = "test", seed: int = 0, dtype=DEFAULT_DTYPE) -> "PerceptualBackbone":
        """Fixed-seed frozen weights (He-normal), used by the test profile."""
        spec = get_profile(profile)
        rng = np.random.default_rng(seed)
        tensors = {}
        for name, c_in, c_out in spec.layers():
            std = np.sqrt(2.0 / (c_in * 9))
            tensors[f"{name}.weight"] = Tensor(rng.normal(0.0, std, size=(c_out, c_in, 3, 3)), dtype=dtype)
            tensors[f"{name}.bias"] = Tensor(np.zeros(c_out), dtype=dtype)
        return cls(spec, tensors)

    @classmethod
    def load(cls, profile: str, path: Path, dtype=DEFAULT_DTYPE) -> "PerceptualBackbone":
        """Weights converted offline into the checkpoint container, one entry per conv{b}_{n}.weight/bias."""
        from .checkpoint import read_container
        path = Path(path)
        if not path.is_file():
            raise ConfigError(
                message="Backbone weight file not found",
                details=f"No weight file at: {path}",
                example="backbone_weights=weights/vgg16.rcnt"
            )
        arrays, metadata = read_container(path.read_bytes())
        logger.info(f"Loaded {profile} backbone weights from {path} ({len(arrays)} tensors)")
        return cls(get_profile(profile), {k: Tensor(v, dtype=dtype) for k, v in arrays.items()})

    def astype(self, dtype) -> "PerceptualBackbone":
        return PerceptualBackbone(self.profile, {k: v.astype(dtype) for k, v in self.tensors.items()})

    def features(self, image: Tensor) -> Dict[str, Tensor]:
        if image.ndim != 3 or image.shape[0] != 3:
            raise ShapeError(message="backbone: expected a (3, H, W) image", details=f"got shape {image.shape}")
        _, height, width = image.shape
        if height % BACKBONE_STRIDE or width % BACKBONE_STRIDE:
            raise ShapeError(
                message="backbone: spatial size not divisible by 8",
                details=f"image is {width}x{height}"
            )
        x = image
        if self._normalize is not None:
            x = ops.channel_mix(x, *self._normalize)
        taps: Dict[str, Tensor] = {}
        layers = iter(self.profile.layers())
        for block, (tap, convs) in enumerate(zip(STYLE_TAPS, self.profile.block_convs)):
            if block:
                x = ops.max_pool2d(x)
            for _ in range(convs):
                name, _, _ = next(layers)
                x = ops.relu(ops.conv2d(x, self.tensors[f"{name}.weight"], self.tensors[f"{name}.bias"]))
            taps[tap] = x
        return taps


def backbone_features(image: Tensor, backbone: PerceptualBackbone) -> Dict[str, Tensor]:
    return backbone.features(image)


def build_backbone(profile: str, weights: Optional[Path] = None, seed: int = 0) -> PerceptualBackbone:
    if weights is not None:
        return PerceptualBackbone.load(profile, weights)
    if profile == "vgg16":
        raise ConfigError(
            message="vgg16 backbone needs a weight file",
            details="Set backbone_weights to a converted VGG-16 weight file",
            example="backbone=test runs without external weights"
        )
    return PerceptualBackbone.random(profile, seed)
