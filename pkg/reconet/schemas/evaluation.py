# reconet/schemas/evaluation.py
from typing import Dict, List, Literal

from pydantic import BaseModel, Field, model_validator


class HistogramReport(BaseModel):
    """Per-channel histogram of absolute warping error"""
    colorspace: Literal["RGB", "XYZ"]
    channels: List[str]
    bin_edges: List[float]
    counts: Dict[str, List[int]]
    sample_count: int = Field(..., description="Masked pixels over all transitions")

    @model_validator(mode="after")
    def check_mass(self):
        for channel in self.channels:
            if len(self.counts[channel]) != len(self.bin_edges) - 1:
                raise ValueError(f"channel {channel} has {len(self.counts[channel])} bins for {len(self.bin_edges)} edges")
            if sum(self.counts[channel]) != self.sample_count:
                raise ValueError(f"channel {channel} counts do not sum to {self.sample_count}")
        return self

    def csv_rows(self) -> List[List[str]]:
        header = ["bin_lo", "bin_hi"] + [f"count_{c}" for c in self.channels]
        rows = [header]
        for i in range(len(self.bin_edges) - 1):
            rows.append([repr(self.bin_edges[i]), repr(self.bin_edges[i + 1])]
                        + [str(self.counts[c][i]) for c in self.channels])
        return rows


class StabilityReport(BaseModel):
    scenes: Dict[str, float]
    average: float


class FpsReport(BaseModel):
    """Not comparable to published GPU figures; CPU numpy runtime."""
    resolution: str
    warmup_iters: int
    timed_iters: int
    hardware: str
    latencies_ms: List[float]
    median_ms: float
    mean_ms: float
    fps: float

    def to_key_values(self) -> Dict[str, str]:
        return {
            "resolution": self.resolution,
            "warmup_iters": str(self.warmup_iters),
            "timed_iters": str(self.timed_iters),
            "hardware": self.hardware,
            "median_ms": f"{self.median_ms:.3f}",
            "mean_ms": f"{self.mean_ms:.3f}",
            "fps": f"{self.fps:.3f}",
        }
