# reconet/engine/ops.py
"""Differentiable primitives. Every op takes and returns Tensors in (C, H, W)
layout, one image per call; constants (flows, masks, colour matrices) are
plain numpy arrays and never receive gradients."""
from typing import Optional, Tuple, Union

import numpy as np

from reconet.utils.errors import ShapeError

from .sampling import sample_array, scatter_array
from .tensor import Tensor, make_result

Array = np.ndarray


def _as_constant(value, dtype) -> Array:
    if isinstance(value, Tensor):
        value = value.data
    return np.asarray(value, dtype=dtype)


def _check_same_shape(op: str, a: Tensor, b: Tensor) -> None:
    if a.shape != b.shape:
        raise ShapeError(
            message=f"{op}: shape mismatch",
            details=f"{op} needs identical shapes, got {a.shape} and {b.shape}",
            example="Only tensor-tensor with equal shapes or tensor-scalar are supported"
        )


def _check_rank(op: str, t: Tensor, rank: int, layout: str) -> None:
    if t.ndim != rank:
        raise ShapeError(
            message=f"{op}: wrong rank",
            details=f"{op} expects a rank-{rank} {layout} tensor, got shape {t.shape}"
        )


# Convolution ------------------------------------------------------------------

def _reflect_pad_adjoint(grad: Array, pad: int) -> Array:
    """Fold gradients of a reflect-padded (C, H+2p, W+2p) array back onto (C, H, W)."""
    for axis in (1, 2):
        g = np.moveaxis(grad, axis, 0)
        n = g.shape[0] - 2 * pad
        core = g[pad:pad + n].copy()
        core[1:pad + 1] += g[:pad][::-1]
        core[n - 1 - pad:n - 1] += g[pad + n:][::-1]
        grad = np.moveaxis(core, 0, axis)
    return np.ascontiguousarray(grad)


def conv2d(input: Tensor, weight: Tensor, bias: Tensor, stride: int = 1, padding_mode: str = "reflect") -> Tensor:
    _check_rank("conv2d", input, 3, "[C_in,H,W]")
    _check_rank("conv2d", weight, 4, "[C_out,C_in,k,k]")
    c_in, height, width = input.shape
    c_out, w_in, k, k2 = weight.shape
    if padding_mode != "reflect":
        raise ShapeError(message="conv2d: unsupported padding", details=f"padding_mode '{padding_mode}' is not 'reflect'")
    if w_in != c_in:
        raise ShapeError(
            message="conv2d: channel mismatch",
            details=f"dimension C_in: input has {c_in} channels, weight expects {w_in}"
        )
    if k != k2 or k % 2 == 0:
        raise ShapeError(
            message="conv2d: kernel must be square and odd",
            details=f"dimension k: got kernel {k}x{k2}",
            example="Use 1x1, 3x3 or 9x9 kernels"
        )
    if stride not in (1, 2):
        raise ShapeError(message="conv2d: unsupported stride", details=f"dimension stride: {stride} not in (1, 2)")
    # reflect padding needs pad < size
    if height <= (k - 1) // 2 or width <= (k - 1) // 2:
        raise ShapeError(
            message="conv2d: input too small for reflect padding",
            details=f"dimension H/W: input {height}x{width} with kernel {k}"
        )
    if height % stride or width % stride:
        raise ShapeError(
            message="conv2d: spatial size not divisible by stride",
            details=f"dimension H/W: {height}x{width} with stride {stride}"
        )
    if bias.shape != (c_out,):
        raise ShapeError(message="conv2d: bias mismatch", details=f"dimension C_out: bias {bias.shape} for {c_out} filters")

    pad = (k - 1) // 2
    x = input.data
    w = weight.data
    xp = np.pad(x, ((0, 0), (pad, pad), (pad, pad)), mode="reflect") if pad else x
    out_h, out_w = height // stride, width // stride
    span_h, span_w = stride * out_h, stride * out_w

    out = np.zeros((c_out, out_h, out_w), dtype=x.dtype)
    for i in range(k):
        for j in range(k):
            patch = xp[:, i:i + span_h:stride, j:j + span_w:stride]
            out += np.tensordot(w[:, :, i, j], patch, axes=(1, 0))
    out += bias.data[:, None, None]

    def backward_fn(g):
        grad_x = grad_w = grad_b = None
        if weight.requires_grad:
            grad_w = np.empty_like(w)
            for i in range(k):
                for j in range(k):
                    patch = xp[:, i:i + span_h:stride, j:j + span_w:stride]
                    grad_w[:, :, i, j] = np.tensordot(g, patch, axes=([1, 2], [1, 2]))
        if bias.requires_grad:
            grad_b = g.sum(axis=(1, 2))
        if input.requires_grad:
            grad_xp = np.zeros_like(xp)
            for i in range(k):
                for j in range(k):
                    grad_xp[:, i:i + span_h:stride, j:j + span_w:stride] += np.tensordot(w[:, :, i, j], g, axes=(0, 0))
            grad_x = _reflect_pad_adjoint(grad_xp, pad) if pad else grad_xp
        return grad_x, grad_w, grad_b

    return make_result(out, (input, weight, bias), backward_fn, "conv2d")


# Normalization and activations -------------------------------------------------

def instance_norm(input: Tensor, scale: Tensor, shift: Tensor, eps: float = 1e-5) -> Tensor:
    _check_rank("instance_norm", input, 3, "[C,H,W]")
    channels, height, width = input.shape
    count = height * width
    if count < 2:
        raise ShapeError(message="instance_norm: too few pixels", details=f"H*W = {count}, need at least 2")
    if scale.shape != (channels,) or shift.shape != (channels,):
        raise ShapeError(
            message="instance_norm: affine mismatch",
            details=f"dimension C: scale {scale.shape} / shift {shift.shape} for {channels} channels"
        )
    x = input.data
    mean = x.mean(axis=(1, 2), keepdims=True)
    centered = x - mean
    var = (centered * centered).mean(axis=(1, 2), keepdims=True)
    inv_std = 1.0 / np.sqrt(var + np.asarray(eps, dtype=x.dtype))
    x_hat = centered * inv_std
    gamma = scale.data[:, None, None]
    out = gamma * x_hat + shift.data[:, None, None]

    def backward_fn(g):
        grad_scale = (g * x_hat).sum(axis=(1, 2)) if scale.requires_grad else None
        grad_shift = g.sum(axis=(1, 2)) if shift.requires_grad else None
        grad_x = None
        if input.requires_grad:
            g_hat = g * gamma
            grad_x = (inv_std / count) * (
                count * g_hat
                - g_hat.sum(axis=(1, 2), keepdims=True)
                - x_hat * (g_hat * x_hat).sum(axis=(1, 2), keepdims=True)
            )
        return grad_x, grad_scale, grad_shift

    return make_result(out, (input, scale, shift), backward_fn, "instance_norm")


def relu(t: Tensor) -> Tensor:
    x = t.data
    active = x > 0
    out = np.where(active, x, np.zeros((), dtype=x.dtype))
    return make_result(out, (t,), lambda g: (g * active,), "relu")


def tanh(t: Tensor) -> Tensor:
    out = np.tanh(t.data)
    return make_result(out, (t,), lambda g: (g * (1 - out * out),), "tanh")


def upsample_nearest2x(input: Tensor) -> Tensor:
    _check_rank("upsample_nearest2x", input, 3, "[C,H,W]")
    channels, height, width = input.shape
    out = input.data.repeat(2, axis=1).repeat(2, axis=2)

    def backward_fn(g):
        return (g.reshape(channels, height, 2, width, 2).sum(axis=(2, 4)),)

    return make_result(out, (input,), backward_fn, "upsample_nearest2x")


def max_pool2d(input: Tensor) -> Tensor:
    """2x2 max pooling with stride 2; ties go to the first element of the window."""
    _check_rank("max_pool2d", input, 3, "[C,H,W]")
    channels, height, width = input.shape
    if height % 2 or width % 2:
        raise ShapeError(message="max_pool2d: odd spatial size", details=f"dimension H/W: {height}x{width}")
    h2, w2 = height // 2, width // 2
    windows = (input.data.reshape(channels, h2, 2, w2, 2)
               .transpose(0, 1, 3, 2, 4).reshape(channels, h2, w2, 4))
    argmax = windows.argmax(axis=-1)[..., None]
    out = np.take_along_axis(windows, argmax, axis=-1)[..., 0]

    def backward_fn(g):
        grad = np.zeros((channels, h2, w2, 4), dtype=g.dtype)
        np.put_along_axis(grad, argmax, g[..., None], axis=-1)
        return (grad.reshape(channels, h2, w2, 2, 2).transpose(0, 1, 3, 2, 4).reshape(channels, height, width),)

    return make_result(out, (input,), backward_fn, "max_pool2d")


# Sampling ----------------------------------------------------------------------

def bilinear_sample(source: Tensor, flow: Array) -> Tensor:
    """Pull source at p + flow(p) for every destination pixel p.

    ``flow`` is an (H, W, 2) array of (dx, dy) in pixel units. Locations
    outside the image clamp to the border. Differentiable w.r.t. source only.
    """
    _check_rank("bilinear_sample", source, 3, "[C,H,W]")
    flow = np.asarray(flow)
    if flow.shape != (source.shape[1], source.shape[2], 2):
        raise ShapeError(
            message="bilinear_sample: flow size mismatch",
            details=f"flow {flow.shape[:2]} vs source {source.shape[1:]}"
        )
    out = sample_array(source.data, flow)
    return make_result(out, (source,), lambda g: (scatter_array(g, flow),), "bilinear_sample")


# Elementwise and reductions ------------------------------------------------------

def add(a: Tensor, b: Tensor) -> Tensor:
    _check_same_shape("add", a, b)
    return make_result(a.data + b.data, (a, b), lambda g: (g, g), "add")


def sub(a: Tensor, b: Tensor) -> Tensor:
    _check_same_shape("sub", a, b)
    return make_result(a.data - b.data, (a, b), lambda g: (g, -g), "sub")


def mul(a: Tensor, b: Tensor) -> Tensor:
    _check_same_shape("mul", a, b)
    x, y = a.data, b.data
    return make_result(x * y, (a, b), lambda g: (g * y, g * x), "mul")


def mul_scalar(t: Tensor, scalar: float) -> Tensor:
    s = np.asarray(scalar, dtype=t.dtype)
    return make_result(t.data * s, (t,), lambda g: (g * s,), "mul_scalar")


def square(t: Tensor) -> Tensor:
    x = t.data
    return make_result(x * x, (t,), lambda g: (2 * g * x,), "square")


def sum(t: Tensor) -> Tensor:
    shape = t.shape
    out = np.asarray(t.data.sum(), dtype=t.dtype)
    return make_result(out, (t,), lambda g: (np.broadcast_to(g, shape).copy(),), "sum")


def mean(t: Tensor) -> Tensor:
    shape, count = t.shape, t.size
    out = np.asarray(t.data.mean(), dtype=t.dtype)
    return make_result(out, (t,), lambda g: (np.broadcast_to(g / count, shape).copy(),), "mean")


def masked_mean(t: Tensor, mask) -> Tensor:
    """sum(mask * t) / numel(t).

    The divisor is the full element count, not the mask population, matching
    the 1/D normalisation of the temporal losses. A (H, W) mask is applied to
    every channel of a (C, H, W) tensor.
    """
    m = _as_constant(mask, t.dtype)
    if m.shape != t.shape:
        if t.ndim == 3 and m.shape == t.shape[1:]:
            m = np.broadcast_to(m[None], t.shape)
        else:
            raise ShapeError(
                message="masked_mean: mask shape mismatch",
                details=f"mask {m.shape} does not match tensor {t.shape} or its spatial size"
            )
    count = t.size
    out = np.asarray((t.data * m).sum() / count, dtype=t.dtype)
    return make_result(out, (t,), lambda g: (g * m / count,), "masked_mean")


def channel_mix(t: Tensor, matrix, offset: Optional[Array] = None) -> Tensor:
    """out[c'] = sum_c matrix[c', c] * t[c] + offset[c'] with constant matrix/offset."""
    _check_rank("channel_mix", t, 3, "[C,H,W]")
    m = _as_constant(matrix, t.dtype)
    if m.ndim != 2 or m.shape[1] != t.shape[0]:
        raise ShapeError(
            message="channel_mix: matrix mismatch",
            details=f"matrix {m.shape} cannot mix {t.shape[0]} channels"
        )
    out = np.tensordot(m, t.data, axes=(1, 0))
    if offset is not None:
        out = out + _as_constant(offset, t.dtype)[:, None, None]
    return make_result(out, (t,), lambda g: (np.tensordot(m.T, g, axes=(1, 0)),), "channel_mix")


def reshape(t: Tensor, shape: Tuple[int, ...]) -> Tensor:
    original = t.shape
    try:
        out = t.data.reshape(shape)
    except ValueError:
        raise ShapeError(message="reshape: size mismatch", details=f"cannot reshape {original} to {shape}")
    return make_result(out, (t,), lambda g: (g.reshape(original),), "reshape")


def transpose(t: Tensor) -> Tensor:
    _check_rank("transpose", t, 2, "matrix")
    return make_result(np.ascontiguousarray(t.data.T), (t,), lambda g: (g.T,), "transpose")


def matmul(a: Tensor, b: Tensor) -> Tensor:
    _check_rank("matmul", a, 2, "matrix")
    _check_rank("matmul", b, 2, "matrix")
    if a.shape[1] != b.shape[0]:
        raise ShapeError(message="matmul: inner dimension mismatch", details=f"{a.shape} @ {b.shape}")
    x, y = a.data, b.data
    return make_result(x @ y, (a, b), lambda g: (g @ y.T, x.T @ g), "matmul")


def crop(t: Tensor, index: Tuple[Union[slice, int], ...]) -> Tensor:
    """Differentiable basic slicing, e.g. crop(x, (slice(None), slice(1, None)))."""
    shape = t.shape
    out = np.ascontiguousarray(t.data[index])

    def backward_fn(g):
        grad = np.zeros(shape, dtype=g.dtype)
        grad[index] = g
        return (grad,)

    return make_result(out, (t,), backward_fn, "crop")


def detach(t: Tensor) -> Tensor:
    return t.detach()
