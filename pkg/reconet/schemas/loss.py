# reconet/schemas/loss.py
from typing import Any, Dict, List, Optional

from pydantic import BaseModel, ConfigDict, Field, PrivateAttr

CSV_HEADER = ["step", "content", "style", "tv", "temp_f", "temp_o", "total"]


class LossWeights(BaseModel):
    alpha: float = Field(1.0, ge=0, description="Content weight")
    beta: float = Field(10.0, ge=0, description="Style weight")
    gamma: float = Field(1e-3, ge=0, description="Total variation weight")
    lambda_f: float = Field(1e7, ge=0, description="Feature-map temporal weight")
    lambda_o: float = Field(2e3, ge=0, description="Output temporal weight")

    model_config = ConfigDict(frozen=True)


class LossBreakdown(BaseModel):
    """Unweighted loss terms of one two-frame step plus their weighted total."""
    content: float
    style: float
    tv: float
    temporal_feature: float
    temporal_output: float
    total: float

    # Differentiable total; only present while the tape that produced it is alive
    _graph_total: Optional[Any] = PrivateAttr(default=None)

    @classmethod
    def compose(cls, weights: LossWeights, content: float, style: float, tv: float,
                temporal_feature: float, temporal_output: float) -> "LossBreakdown":
        total = (weights.alpha * content + weights.beta * style + weights.gamma * tv
                 + weights.lambda_f * temporal_feature + weights.lambda_o * temporal_output)
        return cls(content=content, style=style, tv=tv, temporal_feature=temporal_feature,
                   temporal_output=temporal_output, total=total)

    @property
    def graph_total(self):
        return self._graph_total

    def terms(self) -> Dict[str, float]:
        return {
            "content": self.content,
            "style": self.style,
            "tv": self.tv,
            "temp_f": self.temporal_feature,
            "temp_o": self.temporal_output,
        }

    def first_non_finite(self) -> Optional[str]:
        import math
        for name, value in self.terms().items():
            if not math.isfinite(value):
                return name
        if not math.isfinite(self.total):
            return "total"
        return None

    def csv_row(self, step: int) -> List[str]:
        return [str(step)] + [repr(float(v)) for v in self.terms().values()] + [repr(float(self.total))]

    @classmethod
    def mean(cls, weights: LossWeights, parts: List["LossBreakdown"]) -> "LossBreakdown":
        n = float(len(parts))
        return cls.compose(
            weights,
            content=sum(p.content for p in parts) / n,
            style=sum(p.style for p in parts) / n,
            tv=sum(p.tv for p in parts) / n,
            temporal_feature=sum(p.temporal_feature for p in parts) / n,
            temporal_output=sum(p.temporal_output for p in parts) / n,
        )
