# reconet/evaluation/maps.py
from pathlib import Path
from typing import List

import numpy as np
from pydantic import BaseModel, ConfigDict

from reconet.flow.transforms import warp_array
from reconet.losses import LUMINANCE
from reconet.models.sample import SceneSequence
from reconet.utils.errors import DatasetError
from reconet.utils.imageio import write_gray

DEFAULT_ERR_SCALE = 0.5


class ErrorMapPair(BaseModel):
    index: int
    total: np.ndarray
    luminance: np.ndarray

    model_config = ConfigDict(arbitrary_types_allowed=True)


def temporal_error_maps(outputs: SceneSequence, inputs: SceneSequence) -> List[ErrorMapPair]:
    """Total map: masked sum_c |dO_c|. Luminance map: masked |Y(dO) - Y(dI)|.

    Both sequences share the same flows and masks; those of ``outputs`` are used.
    """
    if len(outputs.frames) != len(inputs.frames):
        raise DatasetError(
            message="Mismatched sequence lengths",
            details=f"{len(outputs.frames)} output frames vs {len(inputs.frames)} input frames"
        )
    if outputs.frames[0].shape != inputs.frames[0].shape:
        raise DatasetError(
            message="Mismatched frame sizes",
            details=f"outputs {outputs.frames[0].shape} vs inputs {inputs.frames[0].shape}"
        )
    maps = []
    for t in range(1, len(outputs.frames)):
        flow = outputs.flows[t - 1]
        mask = outputs.masks[t - 1].values
        delta_o = outputs.frames[t].astype(np.float64) - warp_array(outputs.frames[t - 1].astype(np.float64), flow)
        delta_i = inputs.frames[t].astype(np.float64) - warp_array(inputs.frames[t - 1].astype(np.float64), flow)
        total = mask * np.sum(np.abs(delta_o), axis=0)
        luminance = mask * np.abs(np.tensordot(LUMINANCE, delta_o - delta_i, axes=(0, 0)))
        maps.append(ErrorMapPair(index=t, total=total, luminance=luminance))
    return maps


def scale_to_uint8(error: np.ndarray, err_scale: float = DEFAULT_ERR_SCALE) -> np.ndarray:
    return np.clip(np.rint(error * 255.0 / err_scale), 0, 255).astype(np.uint8)


def write_error_maps(maps: List[ErrorMapPair], out_dir: Path, err_scale: float = DEFAULT_ERR_SCALE) -> List[Path]:
    """One total_/luminance_ PNG per transition; the scale factor is part of the file name."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    for pair in maps:
        for kind, error in (("total", pair.total), ("luminance", pair.luminance)):
            path = out_dir / f"{kind}_{pair.index:04d}_s{err_scale:.2f}.png"
            write_gray(path, scale_to_uint8(error, err_scale))
            written.append(path)
    return written
