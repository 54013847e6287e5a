# reconet/models/flow.py
import numpy as np
from pydantic import BaseModel, ConfigDict, field_validator


class FlowField(BaseModel):
    """Per-pixel (dx, dy) in pixel units, (H, W, 2).

    Sampling convention: for each current-frame pixel p, p + flow(p) is its
    location in the previous frame.
    """
    vectors: np.ndarray
    approximate: bool = False

    model_config = ConfigDict(arbitrary_types_allowed=True)

    @field_validator("vectors", mode="before")
    @classmethod
    def check_vectors(cls, value):
        value = np.ascontiguousarray(value, dtype=np.float32)
        if value.ndim != 3 or value.shape[2] != 2:
            raise ValueError(f"flow vectors must be (H, W, 2), got {value.shape}")
        if not np.all(np.isfinite(value)):
            raise ValueError("flow vectors must be finite")
        return value

    @property
    def width(self) -> int:
        return self.vectors.shape[1]

    @property
    def height(self) -> int:
        return self.vectors.shape[0]

    @property
    def size(self):
        return self.height, self.width

    def out_of_bounds(self) -> bool:
        """Sanity bound: |dx| <= width and |dy| <= height."""
        return bool(np.any(np.abs(self.vectors[..., 0]) > self.width)
                    or np.any(np.abs(self.vectors[..., 1]) > self.height))

    @classmethod
    def constant(cls, height: int, width: int, dx: float, dy: float) -> "FlowField":
        vectors = np.empty((height, width, 2), dtype=np.float32)
        vectors[..., 0] = dx
        vectors[..., 1] = dy
        return cls(vectors=vectors)

    @classmethod
    def zeros(cls, height: int, width: int) -> "FlowField":
        return cls(vectors=np.zeros((height, width, 2), dtype=np.float32))


class OcclusionMask(BaseModel):
    """(H, W) map, 1 at traceable pixels and 0 at untraceable ones."""
    values: np.ndarray

    model_config = ConfigDict(arbitrary_types_allowed=True)

    @field_validator("values", mode="before")
    @classmethod
    def check_values(cls, value):
        value = np.ascontiguousarray(value, dtype=np.float32)
        if value.ndim != 2:
            raise ValueError(f"mask must be (H, W), got {value.shape}")
        if not np.all((value == 0) | (value == 1)):
            raise ValueError("mask values must be exactly 0 or 1")
        return value

    @property
    def width(self) -> int:
        return self.values.shape[1]

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def size(self):
        return self.height, self.width

    @classmethod
    def full(cls, height: int, width: int) -> "OcclusionMask":
        return cls(values=np.ones((height, width), dtype=np.float32))
