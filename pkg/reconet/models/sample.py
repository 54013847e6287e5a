# reconet/models/sample.py
from typing import List, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, field_validator, model_validator

from .flow import FlowField, OcclusionMask

FEATURE_FACTOR = 4


def _as_frame(value) -> np.ndarray:
    value = np.ascontiguousarray(value, dtype=np.float32)
    if value.ndim != 3 or value.shape[0] != 3:
        raise ValueError(f"frames must be (3, H, W), got {value.shape}")
    return value


class FramePairSample(BaseModel):
    """(I_prev, I_cur, flow, mask) plus the factor-4 flow/mask used on encoder features."""
    prev: np.ndarray
    cur: np.ndarray
    flow: FlowField
    mask: OcclusionMask
    flow_ds: Optional[FlowField] = None
    mask_ds: Optional[OcclusionMask] = None
    name: str = ""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    @field_validator("prev", "cur", mode="before")
    @classmethod
    def check_frame(cls, value):
        return _as_frame(value)

    @model_validator(mode="after")
    def check_sizes(self):
        size = self.prev.shape[1:]
        if self.cur.shape[1:] != size or self.flow.size != size or self.mask.size != size:
            raise ValueError(
                f"sample sizes disagree: prev {size}, cur {self.cur.shape[1:]}, "
                f"flow {self.flow.size}, mask {self.mask.size}"
            )
        if self.flow_ds is None or self.mask_ds is None:
            from reconet.flow.transforms import downscale_flow
            self.flow_ds, self.mask_ds = downscale_flow(self.flow, self.mask, FEATURE_FACTOR)
        expected = (size[0] // FEATURE_FACTOR, size[1] // FEATURE_FACTOR)
        if self.flow_ds.size != expected or self.mask_ds.size != expected:
            raise ValueError(f"downscaled flow/mask must be {expected}")
        return self

    @property
    def height(self) -> int:
        return self.prev.shape[1]

    @property
    def width(self) -> int:
        return self.prev.shape[2]


class SceneSequence(BaseModel):
    """Frames O_1..O_T (or I_1..I_T) with flows/masks; index t pairs (t, t+1)."""
    frames: List[np.ndarray]
    flows: List[FlowField]
    masks: List[OcclusionMask]
    name: str = ""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    @field_validator("frames", mode="before")
    @classmethod
    def check_frames(cls, value):
        return [_as_frame(frame) for frame in value]

    @model_validator(mode="after")
    def check_alignment(self):
        if len(self.frames) < 2:
            raise ValueError(f"a scene needs at least 2 frames, got {len(self.frames)}")
        if len(self.flows) != len(self.frames) - 1 or len(self.masks) != len(self.frames) - 1:
            raise ValueError(
                f"{len(self.frames)} frames need {len(self.frames) - 1} flows and masks, "
                f"got {len(self.flows)} flows and {len(self.masks)} masks"
            )
        size = self.frames[0].shape
        for frame in self.frames:
            if frame.shape != size:
                raise ValueError(f"frame sizes disagree: {frame.shape} vs {size}")
        for flow, mask in zip(self.flows, self.masks):
            if flow.size != size[1:] or mask.size != size[1:]:
                raise ValueError(f"flow/mask size {flow.size}/{mask.size} does not match frames {size[1:]}")
        return self

    @property
    def transitions(self) -> int:
        return len(self.frames) - 1
