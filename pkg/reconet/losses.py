# reconet/losses.py
from typing import Dict, Mapping, Optional, Union

import numpy as np
from pydantic import BaseModel, ConfigDict

from reconet.engine import ops
from reconet.engine.tensor import Tensor
from reconet.flow.transforms import warp, warp_array
from reconet.models.flow import FlowField, OcclusionMask
from reconet.schemas.loss import LossBreakdown, LossWeights
from reconet.stylenet.backbone import CONTENT_TAP, STYLE_TAPS
from reconet.utils.errors import ConfigError, ShapeError

# Rec.709 / sRGB primaries, D65 white; the Y row is the relative luminance
LUMINANCE = np.array([0.2126, 0.7152, 0.0722])
RGB_TO_XYZ = np.array([
    [0.4124, 0.3576, 0.1805],
    [0.2126, 0.7152, 0.0722],
    [0.0193, 0.1192, 0.9505],
])
TEMPORAL_VARIANTS = ("rgb_lum", "xyz_lum", "none")

ImageLike = Union[Tensor, np.ndarray]


def _check_rgb(op: str, image: Tensor) -> None:
    if image.ndim != 3 or image.shape[0] != 3:
        raise ShapeError(message=f"{op}: expected 3 channels (R, G, B)", details=f"got shape {image.shape}")


def relative_luminance(image: Tensor) -> Tensor:
    """Y = 0.2126 R + 0.7152 G + 0.0722 B, as a (1, H, W) tensor."""
    _check_rgb("relative_luminance", image)
    return ops.channel_mix(image, LUMINANCE[None, :])


def rgb_to_xyz(image: Tensor) -> Tensor:
    _check_rgb("rgb_to_xyz", image)
    return ops.channel_mix(image, RGB_TO_XYZ)


def _array(value: ImageLike) -> np.ndarray:
    return value.data if isinstance(value, Tensor) else np.asarray(value)


def output_temporal_loss(
    o_prev: Tensor,
    o_cur: Tensor,
    i_prev: ImageLike,
    i_cur: ImageLike,
    flow: FlowField,
    mask: OcclusionMask,
    variant: str = "rgb_lum",
) -> Tensor:
    """Output-level temporal loss, normalised by D = H * W.

    rgb_lum: every RGB channel of the output residual is pulled towards the
    luminance residual of the input. xyz_lum: the Y channel of the XYZ output
    residual is pulled towards the input luminance residual and X, Z towards
    zero. none: plain masked squared output residual.
    """
    if variant not in TEMPORAL_VARIANTS:
        raise ConfigError(
            message="Unknown temporal loss variant",
            details=f"'{variant}' is not one of: {', '.join(TEMPORAL_VARIANTS)}",
            example="temporal_variant=rgb_lum"
        )
    _check_rgb("output_temporal_loss", o_cur)
    if o_prev.shape != o_cur.shape or _array(i_prev).shape != o_cur.shape or _array(i_cur).shape != o_cur.shape:
        raise ShapeError(
            message="output_temporal_loss: shape mismatch",
            details=f"outputs {o_prev.shape}/{o_cur.shape}, inputs {_array(i_prev).shape}/{_array(i_cur).shape}"
        )
    dtype = o_cur.dtype
    channels = o_cur.shape[0]
    delta_o = ops.sub(o_cur, warp(o_prev, flow))

    if variant == "none":
        residual = delta_o
    else:
        delta_i = _array(i_cur).astype(np.float64) - warp_array(_array(i_prev).astype(np.float64), flow)
        delta_i_y = np.tensordot(LUMINANCE, delta_i, axes=(0, 0))
        if variant == "rgb_lum":
            target = np.broadcast_to(delta_i_y[None], o_cur.shape)
            residual = ops.sub(delta_o, Tensor(target, dtype=dtype))
        else:
            target = np.zeros(o_cur.shape)
            target[1] = delta_i_y
            residual = ops.sub(rgb_to_xyz(delta_o), Tensor(target, dtype=dtype))

    # masked_mean divides by C*H*W; the loss sums channels over D = H*W
    return ops.mul_scalar(ops.masked_mean(ops.square(residual), mask.values), float(channels))


def feature_temporal_loss(f_prev: Tensor, f_cur: Tensor, flow_ds: FlowField, mask_ds: OcclusionMask) -> Tensor:
    """(1 / (C h w)) * sum mask * (F_cur - W(F_prev))^2."""
    if f_prev.shape != f_cur.shape:
        raise ShapeError(message="feature_temporal_loss: shape mismatch", details=f"{f_prev.shape} vs {f_cur.shape}")
    residual = ops.sub(f_cur, warp(f_prev, flow_ds))
    return ops.masked_mean(ops.square(residual), mask_ds.values)


def _tap(feats: Mapping[str, Tensor], tap: str, which: str) -> Tensor:
    if tap not in feats:
        raise ShapeError(message="Missing feature tap", details=f"{which} features have no '{tap}' tap")
    return feats[tap]


def content_loss(out_feats: Mapping[str, Tensor], in_feats: Mapping[str, Tensor], tap: str = CONTENT_TAP) -> Tensor:
    out = _tap(out_feats, tap, "output")
    target = _tap(in_feats, tap, "input")
    if out.shape != target.shape:
        raise ShapeError(message="content_loss: shape mismatch", details=f"{out.shape} vs {target.shape}")
    return ops.mean(ops.square(ops.sub(out, target)))


def gram(feat: Tensor) -> Tensor:
    """(C, H, W) -> (C, C) channel covariance divided by C*H*W."""
    if feat.ndim != 3:
        raise ShapeError(message="gram: expected (C, H, W)", details=f"got shape {feat.shape}")
    channels, height, width = feat.shape
    flat = ops.reshape(feat, (channels, height * width))
    return ops.mul_scalar(ops.matmul(flat, ops.transpose(flat)), 1.0 / (channels * height * width))


def style_grams(style_feats: Mapping[str, Tensor]) -> Dict[str, Tensor]:
    return {tap: ops.detach(gram(style_feats[tap])) for tap in STYLE_TAPS}


def style_loss(out_feats: Mapping[str, Tensor], grams: Mapping[str, Tensor]) -> Tensor:
    """Sum over the four style taps of the squared Frobenius distance between grams."""
    missing = [tap for tap in STYLE_TAPS if tap not in out_feats or tap not in grams]
    if missing:
        raise ShapeError(message="style_loss: tap mismatch", details=f"missing taps: {', '.join(missing)}")
    total: Optional[Tensor] = None
    for tap in STYLE_TAPS:
        target = grams[tap]
        g = gram(out_feats[tap])
        if g.shape != target.shape:
            raise ShapeError(message="style_loss: gram size mismatch", details=f"tap {tap}: {g.shape} vs {target.shape}")
        term = ops.sum(ops.square(ops.sub(g, target)))
        total = term if total is None else ops.add(total, term)
    return total


def tv_loss(image: Tensor) -> Tensor:
    """Anisotropic squared total variation divided by the element count."""
    if image.ndim != 3:
        raise ShapeError(message="tv_loss: expected (C, H, W)", details=f"got shape {image.shape}")
    _, height, width = image.shape
    if height < 2 and width < 2:
        raise ShapeError(message="tv_loss: image too small", details=f"{width}x{height}")
    every = slice(None)
    total: Optional[Tensor] = None
    if height > 1:
        dy = ops.sub(ops.crop(image, (every, slice(1, None), every)), ops.crop(image, (every, slice(None, -1), every)))
        total = ops.sum(ops.square(dy))
    if width > 1:
        dx = ops.sub(ops.crop(image, (every, every, slice(1, None))), ops.crop(image, (every, every, slice(None, -1))))
        term = ops.sum(ops.square(dx))
        total = term if total is None else ops.add(total, term)
    return ops.mul_scalar(total, 1.0 / image.size)


class TwoFrameBundle(BaseModel):
    """Everything one two-frame step needs to evaluate the combined loss."""
    inputs_prev: np.ndarray
    inputs_cur: np.ndarray
    outputs_prev: Tensor
    outputs_cur: Tensor
    features_prev: Tensor
    features_cur: Tensor
    out_feats_prev: Dict[str, Tensor]
    out_feats_cur: Dict[str, Tensor]
    in_feats_prev: Dict[str, Tensor]
    in_feats_cur: Dict[str, Tensor]
    style_grams: Dict[str, Tensor]
    flow: FlowField
    mask: OcclusionMask
    flow_ds: FlowField
    mask_ds: OcclusionMask
    variant: str = "rgb_lum"

    model_config = ConfigDict(arbitrary_types_allowed=True)


def total_loss(bundle: TwoFrameBundle, weights: LossWeights) -> LossBreakdown:
    """Perceptual terms summed over both frames plus the two temporal terms.

    The returned breakdown carries the differentiable total as ``graph_total``.
    """
    content = ops.add(content_loss(bundle.out_feats_prev, bundle.in_feats_prev),
                      content_loss(bundle.out_feats_cur, bundle.in_feats_cur))
    style = ops.add(style_loss(bundle.out_feats_prev, bundle.style_grams),
                    style_loss(bundle.out_feats_cur, bundle.style_grams))
    tv = ops.add(tv_loss(bundle.outputs_prev), tv_loss(bundle.outputs_cur))
    temp_f = feature_temporal_loss(bundle.features_prev, bundle.features_cur, bundle.flow_ds, bundle.mask_ds)
    temp_o = output_temporal_loss(bundle.outputs_prev, bundle.outputs_cur, bundle.inputs_prev, bundle.inputs_cur,
                                  bundle.flow, bundle.mask, bundle.variant)

    weighted = [
        ops.mul_scalar(content, weights.alpha),
        ops.mul_scalar(style, weights.beta),
        ops.mul_scalar(tv, weights.gamma),
        ops.mul_scalar(temp_f, weights.lambda_f),
        ops.mul_scalar(temp_o, weights.lambda_o),
    ]
    graph_total = weighted[0]
    for term in weighted[1:]:
        graph_total = ops.add(graph_total, term)

    breakdown = LossBreakdown.compose(
        weights,
        content=float(content.data),
        style=float(style.data),
        tv=float(tv.data),
        temporal_feature=float(temp_f.data),
        temporal_output=float(temp_o.data),
    )
    breakdown._graph_total = graph_total
    return breakdown
