# reconet/evaluation/stability.py
import logging
import math
from typing import Dict, Iterable, List

import numpy as np

from reconet.flow.transforms import warp_array
from reconet.models.sample import SceneSequence
from reconet.schemas.evaluation import StabilityReport
from reconet.utils.errors import DatasetError

logger = logging.getLogger(__name__)


def transition_errors(seq: SceneSequence) -> List[float]:
    """Per-transition (1/D) * sum_p M_t * ||O_t - W_t(O_{t-1})||^2 with D = H * W."""
    errors = []
    for t in range(1, len(seq.frames)):
        prev = seq.frames[t - 1].astype(np.float64)
        cur = seq.frames[t].astype(np.float64)
        residual = cur - warp_array(prev, seq.flows[t - 1])
        per_pixel = np.sum(residual * residual, axis=0)
        errors.append(float(np.sum(seq.masks[t - 1].values * per_pixel)) / per_pixel.size)
    return errors


def e_stab(seq: SceneSequence) -> float:
    """Root of the mean masked warping error over the T - 1 transitions of a scene."""
    if len(seq.frames) < 2:
        raise DatasetError(message="e_stab needs at least 2 frames", details=f"scene '{seq.name}' has {len(seq.frames)}")
    errors = transition_errors(seq)
    return math.sqrt(sum(errors) / len(errors))


def scene_stability(scenes: Iterable[SceneSequence]) -> StabilityReport:
    values: Dict[str, float] = {}
    for index, seq in enumerate(scenes):
        name = seq.name or f"scene_{index}"
        values[name] = e_stab(seq)
        logger.info(f"e_stab[{name}] = {values[name]:.6f}")
    if not values:
        raise DatasetError(message="No scenes to evaluate")
    return StabilityReport(scenes=values, average=sum(values.values()) / len(values))
