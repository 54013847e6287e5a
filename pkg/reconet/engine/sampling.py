# reconet/engine/sampling.py
from typing import List, Tuple

import numpy as np


def bilinear_taps(flow: np.ndarray, height: int, width: int) -> Tuple[List[np.ndarray], List[np.ndarray]]:
    """Flat indices and weights of the four neighbours of p + flow(p).

    ``flow`` is (H, W, 2) holding (dx, dy) in pixel units. Sample locations
    are clamped to the image border, so every tap index is valid.
    """
    ys, xs = np.mgrid[0:height, 0:width]
    x = np.clip(xs + flow[..., 0].astype(np.float64), 0, width - 1)
    y = np.clip(ys + flow[..., 1].astype(np.float64), 0, height - 1)
    x0 = np.floor(x).astype(np.int64)
    y0 = np.floor(y).astype(np.int64)
    x1 = np.minimum(x0 + 1, width - 1)
    y1 = np.minimum(y0 + 1, height - 1)
    fx = x - x0
    fy = y - y0
    indices = [y0 * width + x0, y0 * width + x1, y1 * width + x0, y1 * width + x1]
    weights = [(1 - fx) * (1 - fy), fx * (1 - fy), (1 - fx) * fy, fx * fy]
    return indices, weights


def sample_array(source: np.ndarray, flow: np.ndarray) -> np.ndarray:
    """Bilinear pull of a (C, H, W) array at p + flow(p); no gradient bookkeeping."""
    channels, height, width = source.shape
    indices, weights = bilinear_taps(flow, height, width)
    flat = source.reshape(channels, -1)
    out = flat[:, indices[0].ravel()] * weights[0].ravel().astype(source.dtype)
    for index, weight in zip(indices[1:], weights[1:]):
        out += flat[:, index.ravel()] * weight.ravel().astype(source.dtype)
    return out.reshape(channels, height, width)


def scatter_array(grad: np.ndarray, flow: np.ndarray) -> np.ndarray:
    """Adjoint of sample_array: distribute (C, H, W) grads back onto the source grid."""
    channels, height, width = grad.shape
    size = height * width
    indices, weights = bilinear_taps(flow, height, width)
    flat_grad = grad.reshape(channels, -1).astype(np.float64)
    offsets = (np.arange(channels, dtype=np.int64) * size)[:, None]
    out = np.zeros(channels * size, dtype=np.float64)
    for index, weight in zip(indices, weights):
        out += np.bincount((offsets + index.ravel()[None, :]).ravel(),
                           weights=(flat_grad * weight.ravel()[None, :]).ravel(),
                           minlength=channels * size)
    return out.reshape(channels, height, width).astype(grad.dtype)
