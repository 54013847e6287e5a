# reconet/flow/occlusion.py
import numpy as np

from reconet.engine.sampling import sample_array
from reconet.models.flow import FlowField, OcclusionMask
from reconet.utils.errors import ShapeError

CONSISTENCY_RATIO = 0.01
CONSISTENCY_OFFSET = 0.5
MOTION_RATIO = 0.01
MOTION_OFFSET = 0.002


def occlusion_mask(
    flow_fwd: FlowField,
    flow_bwd: FlowField,
    consistency_ratio: float = CONSISTENCY_RATIO,
    consistency_offset: float = CONSISTENCY_OFFSET,
    motion_boundaries: bool = False,
    motion_ratio: float = MOTION_RATIO,
    motion_offset: float = MOTION_OFFSET,
) -> OcclusionMask:
    """Forward-backward consistency mask for frame t.

    flow_fwd maps t-1 -> t, flow_bwd maps t -> t-1. Pixel p is untraceable when
    |w_b(p) + w_f(p + w_b(p))|^2 > ratio * (|w_b(p)|^2 + |w_f(p + w_b(p))|^2) + offset,
    with w_f sampled bilinearly. The optional motion-boundary test also drops
    pixels where |grad w_b|^2 > motion_ratio * |w_b|^2 + motion_offset.
    """
    if flow_fwd.size != flow_bwd.size:
        raise ShapeError(
            message="occlusion_mask: size mismatch",
            details=f"forward flow {flow_fwd.width}x{flow_fwd.height} vs backward flow {flow_bwd.width}x{flow_bwd.height}"
        )
    backward = flow_bwd.vectors.astype(np.float64)
    forward = flow_fwd.vectors.astype(np.float64).transpose(2, 0, 1)
    forward_at = sample_array(np.ascontiguousarray(forward), backward).transpose(1, 2, 0)

    round_trip = np.sum((backward + forward_at) ** 2, axis=2)
    magnitude = np.sum(backward ** 2, axis=2) + np.sum(forward_at ** 2, axis=2)
    traceable = round_trip <= consistency_ratio * magnitude + consistency_offset

    if motion_boundaries:
        du_dy, du_dx = np.gradient(backward[..., 0])
        dv_dy, dv_dx = np.gradient(backward[..., 1])
        gradient_sq = du_dx ** 2 + du_dy ** 2 + dv_dx ** 2 + dv_dy ** 2
        traceable &= gradient_sq <= motion_ratio * np.sum(backward ** 2, axis=2) + motion_offset

    return OcclusionMask(values=traceable.astype(np.float32))
