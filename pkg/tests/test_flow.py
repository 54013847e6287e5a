# tests/test_flow.py
import struct

import numpy as np
import pytest

from reconet.engine.tensor import Tensor
from reconet.flow.flo import FLO_MAGIC, read_flo, write_flo
from reconet.flow.occlusion import occlusion_mask
from reconet.flow.transforms import (
    downscale_flow, flip_horizontal, resize_flow, resize_mask, sampling_flow, warp, warp_array,
)
from reconet.losses import output_temporal_loss
from reconet.models.flow import FlowField, OcclusionMask
from reconet.utils.errors import FlowFormatError, ShapeError


# .flo files ---------------------------------------------------------------------

def test_smallest_flo_file_roundtrip():
    flow = FlowField(vectors=np.array([[[0.5, -0.25]]]))
    data = write_flo(flow)
    assert len(data) == 20
    assert data[:4] == b"PIEH"
    assert struct.unpack("<f", data[:4])[0] == FLO_MAGIC
    assert write_flo(read_flo(data)) == data
    np.testing.assert_array_equal(read_flo(data).vectors, flow.vectors)


def test_random_flo_roundtrip_is_bit_exact(rng):
    vectors = rng.normal(scale=2.0, size=(6, 8, 2)).astype("<f4")
    data = struct.pack("<fii", FLO_MAGIC, 8, 6) + vectors.tobytes()
    flow = read_flo(data)
    assert (flow.width, flow.height) == (8, 6)
    assert write_flo(flow) == data


def test_zero_magic_is_rejected():
    data = struct.pack("<fii", 0.0, 1, 1) + struct.pack("<ff", 0.0, 0.0)
    with pytest.raises(FlowFormatError, match="not a flow file"):
        read_flo(data)


def test_truncated_payload_is_rejected():
    data = write_flo(FlowField.constant(2, 2, 1.0, 1.0))
    with pytest.raises(FlowFormatError, match="unexpected end of data"):
        read_flo(data[:-1])


def test_trailing_bytes_are_rejected():
    with pytest.raises(FlowFormatError):
        read_flo(write_flo(FlowField.zeros(1, 1)) + b"\x00")


def test_non_finite_vectors_are_rejected():
    with pytest.raises(ValueError):
        FlowField(vectors=np.full((1, 1, 2), np.inf))


# occlusion ------------------------------------------------------------------------

def test_consistent_translation_is_traceable():
    mask = occlusion_mask(FlowField.constant(8, 8, 1, 0), FlowField.constant(8, 8, -1, 0))
    assert np.all(mask.values[:, 1:-1] == 1)


def test_inconsistent_flows_are_untraceable():
    # |5 + 5|^2 = 100 > 0.01 * (25 + 25) + 0.5
    mask = occlusion_mask(FlowField.constant(4, 4, 5, 0), FlowField.constant(4, 4, 5, 0))
    assert np.all(mask.values == 0)


def test_single_pixel_perturbation_only_flips_touching_pixels(rng):
    height, width = 10, 10
    forward = FlowField.constant(height, width, 1, 0)
    backward_vectors = np.tile(np.array([-1.0, 0.0], dtype=np.float32), (height, width, 1))
    backward_vectors[5, 5, 0] += 10.0
    mask = occlusion_mask(forward, FlowField(vectors=backward_vectors))
    expected = np.ones((height, width), dtype=np.float32)
    expected[5, 5] = 0.0
    np.testing.assert_array_equal(mask.values, expected)


def test_mask_values_are_binary(rng):
    forward = FlowField(vectors=rng.normal(size=(6, 6, 2)))
    backward = FlowField(vectors=rng.normal(size=(6, 6, 2)))
    values = occlusion_mask(forward, backward, motion_boundaries=True).values
    assert set(np.unique(values)) <= {0.0, 1.0}


def test_motion_boundary_check_drops_flow_edges():
    backward = np.zeros((8, 8, 2), dtype=np.float32)
    backward[:, 4:, 0] = -3.0
    forward = -backward
    plain = occlusion_mask(FlowField(vectors=forward), FlowField(vectors=backward))
    bounded = occlusion_mask(FlowField(vectors=forward), FlowField(vectors=backward), motion_boundaries=True)
    assert bounded.values.sum() < plain.values.sum()
    assert np.all(bounded.values[:, 0:2] == 1)


def test_occlusion_size_mismatch():
    with pytest.raises(ShapeError):
        occlusion_mask(FlowField.zeros(4, 4), FlowField.zeros(4, 5))


# downscale ---------------------------------------------------------------------------

def test_downscale_constant_flow():
    flow, mask = downscale_flow(FlowField.constant(8, 8, 4, 8), OcclusionMask.full(8, 8), 4)
    assert flow.size == (2, 2)
    np.testing.assert_array_equal(flow.vectors[..., 0], 1.0)
    np.testing.assert_array_equal(flow.vectors[..., 1], 2.0)
    np.testing.assert_array_equal(mask.values, 1.0)


def test_downscale_mask_is_min_pooled():
    values = np.ones((8, 8), dtype=np.float32)
    values[1, 2] = 0.0
    _, mask = downscale_flow(FlowField.zeros(8, 8), OcclusionMask(values=values), 4)
    np.testing.assert_array_equal(mask.values, [[0, 1], [1, 1]])


def test_downscale_feature_resolution():
    flow, mask = downscale_flow(FlowField.zeros(360, 640), OcclusionMask.full(360, 640), 4)
    assert (flow.width, flow.height) == (160, 90)
    assert (mask.width, mask.height) == (160, 90)


def test_downscale_rejects_non_dividing_factor():
    with pytest.raises(ShapeError):
        downscale_flow(FlowField.zeros(6, 6), OcclusionMask.full(6, 6), 4)


# warp and flip -----------------------------------------------------------------------

def test_warp_is_linear(rng):
    flow = FlowField(vectors=rng.uniform(-2, 2, size=(5, 6, 2)))
    x = rng.random((2, 5, 6))
    y = rng.random((2, 5, 6))
    combined = warp(Tensor(2.0 * x - 0.5 * y, dtype=np.float64), flow).data
    separate = 2.0 * warp_array(x, flow) - 0.5 * warp_array(y, flow)
    np.testing.assert_allclose(combined, separate, atol=1e-6)


def test_warp_size_mismatch():
    with pytest.raises(ShapeError):
        warp(Tensor(np.zeros((3, 4, 4))), FlowField.zeros(4, 5))


def test_flip_negates_dx():
    flipped = flip_horizontal(FlowField.constant(3, 4, 1, 2))
    np.testing.assert_array_equal(flipped.vectors[..., 0], -1.0)
    np.testing.assert_array_equal(flipped.vectors[..., 1], 2.0)


def test_double_flip_is_identity(rng):
    flow = FlowField(vectors=rng.normal(size=(4, 5, 2)))
    mask = OcclusionMask(values=(rng.random((4, 5)) > 0.5))
    image = rng.random((3, 4, 5)).astype(np.float32)
    assert np.array_equal(flip_horizontal(flip_horizontal(flow)).vectors, flow.vectors)
    assert np.array_equal(flip_horizontal(flip_horizontal(mask)).values, mask.values)
    assert np.array_equal(flip_horizontal(flip_horizontal(image)), image)


def test_flip_commutes_with_warp(rng):
    image = rng.random((3, 6, 7))
    flow = FlowField(vectors=rng.uniform(-1.5, 1.5, size=(6, 7, 2)))
    lhs = warp_array(flip_horizontal(image), flip_horizontal(flow))
    rhs = flip_horizontal(warp_array(image, flow))
    np.testing.assert_allclose(lhs, rhs, atol=1e-6)


def test_joint_flip_keeps_output_temporal_loss(rng):
    i_prev = rng.random((3, 6, 8))
    flow = FlowField(vectors=rng.uniform(-1, 1, size=(6, 8, 2)))
    mask = OcclusionMask(values=(rng.random((6, 8)) > 0.2))
    i_cur = warp_array(i_prev, flow) + 0.05 * rng.normal(size=(3, 6, 8))
    # an identity "model" is flip-equivariant
    loss = output_temporal_loss(Tensor(i_prev, dtype=np.float64), Tensor(i_cur, dtype=np.float64),
                                i_prev, i_cur, flow, mask, "none")
    flipped = output_temporal_loss(
        Tensor(flip_horizontal(i_prev), dtype=np.float64), Tensor(flip_horizontal(i_cur), dtype=np.float64),
        flip_horizontal(i_prev), flip_horizontal(i_cur), flip_horizontal(flow), flip_horizontal(mask), "none",
    )
    assert float(flipped.data) == pytest.approx(float(loss.data), abs=1e-5)


# convention and resizing ----------------------------------------------------------------

def test_sampling_flow_prefers_backward():
    forward = FlowField.constant(2, 2, 1, 0)
    backward = FlowField.constant(2, 2, -1, 0)
    exact = sampling_flow(forward, backward)
    assert not exact.approximate
    np.testing.assert_array_equal(exact.vectors, backward.vectors)


def test_sampling_flow_negates_forward_when_alone():
    approx = sampling_flow(FlowField.constant(2, 2, 1, 3))
    assert approx.approximate
    np.testing.assert_array_equal(approx.vectors[..., 0], -1.0)
    np.testing.assert_array_equal(approx.vectors[..., 1], -3.0)


def test_resize_flow_scales_vectors():
    resized = resize_flow(FlowField.constant(4, 8, 2, 1), 16, 8)
    assert resized.size == (8, 16)
    np.testing.assert_allclose(resized.vectors[..., 0], 4.0, atol=1e-5)
    np.testing.assert_allclose(resized.vectors[..., 1], 2.0, atol=1e-5)


def test_resize_mask_stays_binary(rng):
    mask = OcclusionMask(values=(rng.random((5, 7)) > 0.5))
    resized = resize_mask(mask, 14, 10)
    assert resized.size == (10, 14)
    assert set(np.unique(resized.values)) <= {0.0, 1.0}
