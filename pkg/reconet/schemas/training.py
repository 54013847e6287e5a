# reconet/schemas/training.py
import hashlib
from pathlib import Path
from typing import Dict, Literal, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, field_validator

from .loss import LossWeights


class AdamConfig(BaseModel):
    learning_rate: float = Field(1e-3, gt=0)
    beta1: float = Field(0.9, ge=0, lt=1)
    beta2: float = Field(0.999, ge=0, lt=1)
    eps: float = Field(1e-8, gt=0)


class TrainConfig(BaseModel):
    # Data
    dataset_root: Optional[Path] = None
    style_image_path: Optional[Path] = None
    out_dir: Optional[Path] = None
    resolution: Tuple[int, int] = Field((640, 360), description="Frame width x height")
    hflip_prob: float = Field(0.5, ge=0, le=1)

    # Optimization
    steps: int = Field(30000, ge=1)
    batch_size: int = Field(2, ge=1)
    learning_rate: float = Field(1e-3, gt=0)
    adam_beta1: float = Field(0.9, ge=0, lt=1)
    adam_beta2: float = Field(0.999, ge=0, lt=1)
    adam_eps: float = Field(1e-8, gt=0)
    seed: int = 0

    # Losses
    weights: LossWeights = LossWeights()
    temporal_variant: Literal["rgb_lum", "xyz_lum", "none"] = "rgb_lum"
    temporal_levels: Literal["both", "feature", "output"] = "both"
    backbone: Literal["vgg16", "test"] = "vgg16"
    backbone_weights: Optional[Path] = None

    # Bookkeeping
    checkpoint_every: int = Field(1000, ge=1)
    log_every: int = Field(50, ge=1)
    resume: Optional[Path] = None

    model_config = ConfigDict(extra="forbid")

    @field_validator("resolution", mode="before")
    @classmethod
    def parse_resolution(cls, value):
        if isinstance(value, str):
            try:
                width, height = value.lower().split("x")
                return int(width), int(height)
            except ValueError:
                raise ValueError(f"resolution must look like 640x360, got '{value}'")
        return value

    @field_validator("resolution")
    @classmethod
    def check_resolution(cls, value):
        width, height = value
        if width <= 0 or height <= 0 or width % 8 or height % 8:
            raise ValueError(f"resolution {width}x{height} must be positive and divisible by 8")
        return value

    @property
    def adam(self) -> AdamConfig:
        return AdamConfig(learning_rate=self.learning_rate, beta1=self.adam_beta1,
                          beta2=self.adam_beta2, eps=self.adam_eps)

    def effective_weights(self) -> LossWeights:
        """Loss weights with the temporal level ablation applied."""
        if self.temporal_levels == "feature":
            return self.weights.model_copy(update={"lambda_o": 0.0})
        if self.temporal_levels == "output":
            return self.weights.model_copy(update={"lambda_f": 0.0})
        return self.weights

    def to_key_values(self) -> Dict[str, str]:
        values: Dict[str, str] = {}
        for key, value in self.model_dump(exclude={"weights"}).items():
            if key == "resolution":
                value = f"{value[0]}x{value[1]}"
            values[key] = "" if value is None else str(value)
        for key, value in self.weights.model_dump().items():
            values[key] = repr(value)
        return values

    def config_hash(self) -> str:
        stable = {k: v for k, v in self.to_key_values().items() if k not in ("resume", "out_dir", "steps")}
        payload = "\n".join(f"{k}={stable[k]}" for k in sorted(stable))
        return hashlib.sha256(payload.encode("utf-8")).hexdigest()[:16]
