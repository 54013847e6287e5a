# reconet/flow/transforms.py
from functools import singledispatch
from typing import Optional, Tuple

import numpy as np
from PIL import Image

from reconet.engine import ops
from reconet.engine.sampling import sample_array
from reconet.engine.tensor import Tensor
from reconet.models.flow import FlowField, OcclusionMask
from reconet.utils.errors import ShapeError


def sampling_flow(forward: FlowField, backward: Optional[FlowField] = None) -> FlowField:
    """Convert stored push flow (t-1 -> t) to the pull convention used by warp.

    The backward flow t -> t-1 already points from each current pixel into the
    previous frame, so it is used as is. Without it the negated forward flow
    stands in; that is exact only for locally uniform motion and is flagged.
    """
    if backward is not None:
        if backward.size != forward.size:
            raise ShapeError(
                message="sampling_flow: size mismatch",
                details=f"forward {forward.size} vs backward {backward.size}"
            )
        return FlowField(vectors=backward.vectors)
    return FlowField(vectors=-forward.vectors, approximate=True)


def downscale_flow(flow: FlowField, mask: OcclusionMask, factor: int) -> Tuple[FlowField, OcclusionMask]:
    """Average-pool vectors and divide by factor; min-pool the mask."""
    height, width = flow.size
    if factor < 1 or height % factor or width % factor:
        raise ShapeError(
            message="downscale_flow: factor does not divide the flow size",
            details=f"{width}x{height} is not divisible by {factor}",
            example="Use factor 4 for 640x360 frames"
        )
    if mask.size != flow.size:
        raise ShapeError(message="downscale_flow: mask size mismatch", details=f"flow {flow.size} vs mask {mask.size}")
    h, w = height // factor, width // factor
    vectors = flow.vectors.reshape(h, factor, w, factor, 2).mean(axis=(1, 3)) / factor
    values = mask.values.reshape(h, factor, w, factor).min(axis=(1, 3))
    return FlowField(vectors=vectors, approximate=flow.approximate), OcclusionMask(values=values)


def _check_flow_size(source_size, flow: FlowField) -> None:
    if tuple(source_size) != flow.size:
        raise ShapeError(
            message="warp: size mismatch",
            details=f"source is {source_size[1]}x{source_size[0]}, flow is {flow.width}x{flow.height}"
        )


def warp(source: Tensor, flow: FlowField) -> Tensor:
    """W(source): pull the previous frame (or feature map) into current-frame coordinates."""
    _check_flow_size(source.shape[1:], flow)
    return ops.bilinear_sample(source, flow.vectors)


def warp_array(source: np.ndarray, flow: FlowField) -> np.ndarray:
    _check_flow_size(source.shape[1:], flow)
    return sample_array(source, flow.vectors)


@singledispatch
def flip_horizontal(image: np.ndarray) -> np.ndarray:
    """Mirror columns of a (C, H, W) image."""
    return np.ascontiguousarray(image[..., ::-1])


@flip_horizontal.register
def _(flow: FlowField) -> FlowField:
    vectors = np.ascontiguousarray(flow.vectors[:, ::-1])
    vectors[..., 0] = -vectors[..., 0]
    return FlowField(vectors=vectors, approximate=flow.approximate)


@flip_horizontal.register
def _(mask: OcclusionMask) -> OcclusionMask:
    return OcclusionMask(values=np.ascontiguousarray(mask.values[:, ::-1]))


def resize_flow(flow: FlowField, width: int, height: int) -> FlowField:
    """Bilinear resize; vectors scale with the size ratio along each axis."""
    if (flow.width, flow.height) == (width, height):
        return flow
    components = []
    for axis, ratio in ((0, width / flow.width), (1, height / flow.height)):
        channel = Image.fromarray(np.ascontiguousarray(flow.vectors[..., axis])).resize((width, height), Image.Resampling.BILINEAR)
        components.append(np.asarray(channel, dtype=np.float32) * ratio)
    return FlowField(vectors=np.stack(components, axis=-1), approximate=flow.approximate)


def resize_mask(mask: OcclusionMask, width: int, height: int) -> OcclusionMask:
    if (mask.width, mask.height) == (width, height):
        return mask
    image = Image.fromarray((mask.values * 255).astype(np.uint8)).resize((width, height), Image.Resampling.NEAREST)
    return OcclusionMask(values=(np.asarray(image) >= 128).astype(np.float32))
