# reconet/evaluation/histogram.py
from typing import Literal, Tuple

import numpy as np

from reconet.flow.transforms import warp_array
from reconet.losses import RGB_TO_XYZ
from reconet.models.sample import SceneSequence
from reconet.schemas.evaluation import HistogramReport

CHANNELS = {"RGB": ["R", "G", "B"], "XYZ": ["X", "Y", "Z"]}


def warp_error_histogram(
    seq: SceneSequence,
    colorspace: Literal["RGB", "XYZ"] = "RGB",
    bins: int = 64,
    value_range: Tuple[float, float] = (0.0, 1.0),
) -> HistogramReport:
    """Histogram of masked |I_t - W_t(I_{t-1})| per channel.

    Errors beyond the range land in the last bin, so every masked pixel is counted.
    """
    colorspace = colorspace.upper()
    if colorspace not in CHANNELS:
        raise ValueError(f"colorspace must be RGB or XYZ, got '{colorspace}'")
    lo, hi = value_range
    edges = np.linspace(lo, hi, bins + 1)
    counts = np.zeros((3, bins), dtype=np.int64)
    sample_count = 0

    for t in range(1, len(seq.frames)):
        prev = seq.frames[t - 1].astype(np.float64)
        cur = seq.frames[t].astype(np.float64)
        if colorspace == "XYZ":
            prev = np.tensordot(RGB_TO_XYZ, prev, axes=(1, 0))
            cur = np.tensordot(RGB_TO_XYZ, cur, axes=(1, 0))
        error = np.abs(cur - warp_array(prev, seq.flows[t - 1]))
        traceable = seq.masks[t - 1].values > 0.5
        sample_count += int(traceable.sum())
        for c in range(3):
            values = np.clip(error[c][traceable], lo, hi)
            counts[c] += np.histogram(values, bins=edges)[0]

    names = CHANNELS[colorspace]
    return HistogramReport(
        colorspace=colorspace,
        channels=names,
        bin_edges=[float(e) for e in edges],
        counts={name: [int(n) for n in counts[c]] for c, name in enumerate(names)},
        sample_count=sample_count,
    )
