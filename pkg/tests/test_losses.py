# tests/test_losses.py
import numpy as np
import pytest

from reconet.engine.gradcheck import finite_diff_check, sample_indices
from reconet.engine.tensor import GRADCHECK_DTYPE, Tensor
from reconet.fixtures import make_style_image, make_translating_scene
from reconet.losses import (
    content_loss, feature_temporal_loss, gram, output_temporal_loss, relative_luminance, rgb_to_xyz,
    style_grams, style_loss, total_loss, tv_loss,
)
from reconet.models.flow import FlowField, OcclusionMask
from reconet.models.sample import FramePairSample
from reconet.schemas.loss import LossWeights
from reconet.stylenet.network import ReCoNet, layer_manifest
from reconet.training.trainer import forward_pair, prepare_style
from reconet.utils.errors import ConfigError, ShapeError

F64 = GRADCHECK_DTYPE


def t64(array, requires_grad=False):
    return Tensor(np.asarray(array, dtype=F64), requires_grad=requires_grad)


def translating_sample(size=16, velocity=(1, 0), seed=0):
    scene = make_translating_scene((size, size), frames=2, velocity=velocity, seed=seed)
    return FramePairSample(prev=scene.frames[0], cur=scene.frames[1], flow=scene.flows[0], mask=scene.masks[0])


# colour ------------------------------------------------------------------------------

def test_luminance_of_white_is_one():
    y = relative_luminance(t64(np.ones((3, 2, 2))))
    assert y.shape == (1, 2, 2)
    np.testing.assert_allclose(y.data, 1.0)


def test_luminance_of_pure_green():
    image = np.zeros((3, 1, 1))
    image[1] = 1.0
    assert float(relative_luminance(t64(image)).data[0, 0, 0]) == pytest.approx(0.7152)


def test_xyz_of_white_is_d65():
    xyz = rgb_to_xyz(t64(np.ones((3, 1, 1))))
    np.testing.assert_allclose(xyz.data[:, 0, 0], [0.9505, 1.0, 1.089], atol=1e-12)


def test_luminance_needs_three_channels():
    with pytest.raises(ShapeError, match="R, G, B"):
        relative_luminance(t64(np.ones((4, 2, 2))))


# output temporal loss ---------------------------------------------------------------------

def brightening(delta, rng, size=(6, 8)):
    height, width = size
    i_prev = rng.uniform(0.1, 0.7, size=(3, height, width))
    o_prev = rng.uniform(0.1, 0.7, size=(3, height, width))
    return i_prev, i_prev + delta, o_prev, o_prev + delta, FlowField.zeros(height, width), OcclusionMask.full(height, width)


@pytest.mark.parametrize("delta", [0.05, 0.2])
def test_global_brightening_is_free_for_luminance_variant(delta, rng):
    i_prev, i_cur, o_prev, o_cur, flow, mask = brightening(delta, rng)
    loss = output_temporal_loss(t64(o_prev), t64(o_cur), i_prev, i_cur, flow, mask, "rgb_lum")
    assert float(loss.data) == pytest.approx(0.0, abs=1e-12)


@pytest.mark.parametrize("delta", [0.05, 0.2])
def test_global_brightening_costs_three_delta_squared_without_luminance(delta, rng):
    i_prev, i_cur, o_prev, o_cur, flow, mask = brightening(delta, rng)
    loss = output_temporal_loss(t64(o_prev), t64(o_cur), i_prev, i_cur, flow, mask, "none")
    assert float(loss.data) == pytest.approx(3 * delta ** 2, rel=1e-9)


def test_xyz_variant_pulls_x_and_z_towards_zero(rng):
    delta = 0.1
    i_prev, i_cur, o_prev, o_cur, flow, mask = brightening(delta, rng)
    loss = output_temporal_loss(t64(o_prev), t64(o_cur), i_prev, i_cur, flow, mask, "xyz_lum")
    assert float(loss.data) == pytest.approx((0.9505 ** 2 + 1.089 ** 2) * delta ** 2, rel=1e-9)


@pytest.mark.parametrize("variant", ["rgb_lum", "xyz_lum", "none"])
def test_fully_masked_pair_has_zero_temporal_loss(variant, rng):
    i_prev, i_cur, o_prev, _, flow, _ = brightening(0.0, rng)
    o_cur = rng.random(o_prev.shape)
    mask = OcclusionMask(values=np.zeros((6, 8)))
    loss = output_temporal_loss(t64(o_prev), t64(o_cur), i_prev, i_cur, flow, mask, variant)
    assert float(loss.data) == 0.0


def test_unknown_variant_is_a_config_error(rng):
    i_prev, i_cur, o_prev, o_cur, flow, mask = brightening(0.1, rng)
    with pytest.raises(ConfigError, match="Unknown temporal loss variant"):
        output_temporal_loss(t64(o_prev), t64(o_cur), i_prev, i_cur, flow, mask, "lab")


def test_output_loss_shape_mismatch(rng):
    with pytest.raises(ShapeError):
        output_temporal_loss(t64(np.zeros((3, 4, 4))), t64(np.zeros((3, 4, 4))), np.zeros((3, 4, 5)),
                             np.zeros((3, 4, 4)), FlowField.zeros(4, 4), OcclusionMask.full(4, 4))


# feature temporal loss ---------------------------------------------------------------------

def test_feature_offset_by_one_costs_one(rng):
    f_prev = rng.normal(size=(4, 3, 5))
    loss = feature_temporal_loss(t64(f_prev), t64(f_prev + 1.0), FlowField.zeros(3, 5), OcclusionMask.full(3, 5))
    assert float(loss.data) == pytest.approx(1.0)


@pytest.mark.parametrize("seed", range(20))
def test_feature_loss_matches_clamped_shift_oracle(seed):
    rng = np.random.default_rng(seed)
    channels, height, width = 4, 16, 16
    dx, dy = int(rng.integers(-2, 3)), int(rng.integers(-2, 3))
    f_prev = rng.normal(size=(channels, height, width))
    f_cur = rng.normal(size=(channels, height, width))
    mask = (rng.random((height, width)) > 0.3).astype(float)
    ys, xs = np.mgrid[0:height, 0:width]
    warped = f_prev[:, np.clip(ys + dy, 0, height - 1), np.clip(xs + dx, 0, width - 1)]
    expected = np.sum(mask * (f_cur - warped) ** 2) / (channels * height * width)
    loss = feature_temporal_loss(t64(f_prev), t64(f_cur), FlowField.constant(height, width, dx, dy),
                                 OcclusionMask(values=mask))
    assert float(loss.data) == pytest.approx(expected, rel=1e-9, abs=1e-12)


def test_feature_loss_shape_mismatch():
    with pytest.raises(ShapeError):
        feature_temporal_loss(t64(np.zeros((2, 4, 4))), t64(np.zeros((3, 4, 4))),
                              FlowField.zeros(4, 4), OcclusionMask.full(4, 4))


# perceptual losses ---------------------------------------------------------------------------

def test_content_offset_by_one_costs_one(rng):
    target = rng.normal(size=(5, 4, 4))
    loss = content_loss({"relu3_3": t64(target + 1.0)}, {"relu3_3": t64(target)})
    assert float(loss.data) == pytest.approx(1.0)


def test_content_loss_needs_its_tap():
    with pytest.raises(ShapeError, match="relu3_3"):
        content_loss({"relu1_2": t64(np.zeros((1, 2, 2)))}, {"relu3_3": t64(np.zeros((1, 2, 2)))})


def test_gram_of_constant_features():
    g = gram(t64(np.ones((2, 3, 4))))
    np.testing.assert_allclose(g.data, np.full((2, 2), 0.5))


def test_gram_is_symmetric(rng):
    g = gram(t64(rng.normal(size=(4, 5, 6)))).data
    np.testing.assert_allclose(g, g.T)


def test_style_loss_against_own_grams_is_zero(test_backbone):
    feats = test_backbone.features(Tensor(make_style_image((32, 32))))
    assert float(style_loss(feats, style_grams(feats)).data) == pytest.approx(0.0, abs=1e-12)


def test_style_loss_is_positive_for_a_different_image(test_backbone, rng):
    grams = prepare_style(make_style_image((32, 32)), test_backbone)
    feats = test_backbone.features(Tensor(rng.random((3, 32, 32))))
    assert float(style_loss(feats, grams).data) > 0.0


def test_tv_of_a_two_pixel_step():
    assert float(tv_loss(t64([[[0.0, 1.0]]])).data) == pytest.approx(0.5)


def test_tv_of_constant_image_is_zero():
    assert float(tv_loss(t64(np.full((3, 4, 4), 0.3))).data) == 0.0


def test_tv_rejects_single_pixel():
    with pytest.raises(ShapeError):
        tv_loss(t64(np.zeros((3, 1, 1))))


# combined loss --------------------------------------------------------------------------------

@pytest.fixture
def bundle(test_backbone):
    sample = translating_sample(size=32)
    grams = prepare_style(make_style_image((32, 32)), test_backbone)
    return forward_pair(ReCoNet.initialize(seed=0), test_backbone, sample, grams)


def test_total_loss_recomposes_from_terms(bundle):
    weights = LossWeights()
    breakdown = total_loss(bundle, weights)
    expected = (weights.alpha * breakdown.content + weights.beta * breakdown.style + weights.gamma * breakdown.tv
                + weights.lambda_f * breakdown.temporal_feature + weights.lambda_o * breakdown.temporal_output)
    assert breakdown.total == pytest.approx(expected, rel=1e-12)
    assert float(breakdown.graph_total.data) == pytest.approx(breakdown.total, rel=1e-4)
    assert breakdown.first_non_finite() is None


def test_zero_weights_give_zero_total(bundle):
    breakdown = total_loss(bundle, LossWeights(alpha=0, beta=0, gamma=0, lambda_f=0, lambda_o=0))
    assert breakdown.total == 0.0
    assert float(breakdown.graph_total.data) == 0.0
    assert breakdown.content > 0.0


def test_negative_weights_are_rejected():
    with pytest.raises(ValueError):
        LossWeights(beta=-1.0)


@pytest.mark.parametrize("variant", ["rgb_lum", "xyz_lum", "none"])
def test_combined_loss_gradient_matches_finite_differences(variant, test_backbone64):
    rng = np.random.default_rng(5)
    sample = translating_sample(size=16, velocity=(1, 1), seed=3)
    model = ReCoNet.initialize(seed=1).astype(F64)
    grams = prepare_style(make_style_image((16, 16)).astype(F64), test_backbone64)
    weights = LossWeights()

    def loss_of(_):
        return total_loss(forward_pair(model, test_backbone64, sample, grams, variant), weights).graph_total

    errors = {}
    for name, param in model.parameters().items():
        errors[name] = finite_diff_check(loss_of, param, h=1e-6, indices=sample_indices(param, 3, rng))
    assert len(errors) == len(layer_manifest())
    assert max(errors.values()) < 1e-3, max(errors, key=errors.get)
