# reconet/schemas/__init__.py
from .loss import LossWeights, LossBreakdown
from .training import TrainConfig, AdamConfig
from .evaluation import HistogramReport, FpsReport, StabilityReport
from .command import CommandSpec
