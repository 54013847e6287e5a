# tests/test_training.py
import csv
import logging

import numpy as np
import pytest

from reconet.engine.tensor import Tensor
from reconet.evaluation.stability import e_stab
from reconet.fixtures import make_translating_scene, write_fixture_dataset
from reconet.models.sample import FramePairSample, SceneSequence
from reconet.schemas.loss import CSV_HEADER, LossWeights
from reconet.stylenet.checkpoint import load_checkpoint_file
from reconet.stylenet.network import ReCoNet
from reconet.training.dataset import augment, load_dataset, load_scene
from reconet.training.optim import AdamState, adam_step, load_adam_state, save_adam_state
from reconet.training.trainer import (
    BatchSchedule, accumulate, load_style_image, prepare_style, train, train_step,
)
from reconet.utils.errors import CheckpointError, ConfigError, DatasetError, ShapeError


def read_rows(path):
    with open(path, newline="", encoding="utf-8") as handle:
        rows = list(csv.reader(handle))
    assert rows[0] == CSV_HEADER
    return [dict(zip(CSV_HEADER, row)) for row in rows[1:]]


def stylized(model, scene):
    return SceneSequence(frames=[model.stylize_array(f) for f in scene.frames], flows=scene.flows,
                         masks=scene.masks, name=scene.name)


# dataset ---------------------------------------------------------------------------

def test_fixture_dataset_pairs_and_flows(fixture_root):
    dataset = load_dataset(fixture_root)
    assert len(dataset) == 9
    for sample in dataset:
        assert not sample.flow.approximate
        np.testing.assert_array_equal(sample.flow.vectors[..., 0], -1.0)
        np.testing.assert_array_equal(sample.flow.vectors[..., 1], 0.0)
        np.testing.assert_array_equal(sample.mask.values[:, 0], 0.0)
        np.testing.assert_array_equal(sample.mask.values[:, 1:], 1.0)
        assert sample.flow_ds.size == (16, 16)


def test_fixture_pairs_are_exactly_related_by_their_flow(fixture_root):
    sample = load_dataset(fixture_root)[0]
    # the roll wraps around; only the masked first column has no source
    np.testing.assert_array_equal(sample.cur[:, :, 1:], sample.prev[:, :, :-1])


def test_fixture_masks_cover_the_wrapped_band():
    scene = make_translating_scene((8, 8), frames=3, velocity=(-2, 1))
    for mask in scene.masks:
        np.testing.assert_array_equal(mask.values[0], 0.0)
        np.testing.assert_array_equal(mask.values[:, 6:], 0.0)
        np.testing.assert_array_equal(mask.values[1:, :6], 1.0)
    assert e_stab(scene) == 0.0


def test_dataset_shuffle_is_seeded(fixture_root):
    names = [ref.name for ref in load_dataset(fixture_root, seed=3).refs]
    assert names == [ref.name for ref in load_dataset(fixture_root, seed=3).refs]
    assert sorted(names) == sorted(ref.name for ref in load_dataset(fixture_root, seed=4).refs)


def test_missing_flow_skips_the_pair(fixture_root, caplog):
    (fixture_root / "scene_00" / "flow" / "frame_0005.flo").unlink()
    with caplog.at_level(logging.WARNING):
        dataset = load_dataset(fixture_root)
    assert len(dataset) == 8
    assert "missing flow" in caplog.text


def test_forward_flow_alone_is_flagged_approximate(tmp_path):
    root = write_fixture_dataset(tmp_path / "fwd_only", frames=3, size=(32, 32), backward=False)
    sample = load_dataset(root)[0]
    assert sample.flow.approximate
    np.testing.assert_array_equal(sample.flow.vectors[..., 0], -1.0)


def test_empty_dataset_is_rejected(tmp_path):
    (tmp_path / "manifest.txt").write_text("missing_scene\n", encoding="utf-8")
    with pytest.raises(DatasetError, match="Empty dataset"):
        load_dataset(tmp_path)


def test_dataset_resizes_to_training_resolution(fixture_root):
    sample = load_dataset(fixture_root, resolution=(32, 32))[0]
    assert sample.prev.shape == (3, 32, 32)
    np.testing.assert_allclose(sample.flow.vectors[..., 0], -0.5, atol=1e-6)


def test_load_scene_aligns_frames_flows_and_masks(fixture_root):
    scene = load_scene(fixture_root / "scene_00")
    assert len(scene.frames) == 10
    assert scene.transitions == 9


def test_load_scene_with_missing_flow(fixture_root):
    (fixture_root / "scene_00" / "flow" / "frame_0005.flo").unlink()
    with pytest.raises(DatasetError, match="Mismatched sequence lengths"):
        load_scene(fixture_root / "scene_00")


def test_load_scene_reads_stylized_frames_from_another_directory(fixture_root, tmp_path):
    frames_dir = tmp_path / "stylized"
    frames_dir.mkdir()
    for name in ("frame_0001.png", "frame_0002.png", "frame_0003.png"):
        (frames_dir / name).write_bytes((fixture_root / "scene_00" / name).read_bytes())
    scene = load_scene(fixture_root / "scene_00", frames_dir)
    assert scene.transitions == 2
    assert scene.name == "scene_00"


# augmentation ------------------------------------------------------------------------

def test_augment_keeps_sample_below_threshold(fixture_root):
    sample = load_dataset(fixture_root)[0]
    assert augment(sample, draw=0.49, hflip_prob=0.5) is sample


def test_augment_flips_everything_jointly(fixture_root):
    sample = load_dataset(fixture_root)[0]
    flipped = augment(sample, draw=0.5, hflip_prob=0.5)
    np.testing.assert_array_equal(flipped.prev, sample.prev[..., ::-1])
    np.testing.assert_array_equal(flipped.flow.vectors[..., 0], 1.0)
    again = augment(flipped, draw=0.9, hflip_prob=0.5)
    np.testing.assert_array_equal(again.cur, sample.cur)
    np.testing.assert_array_equal(again.flow_ds.vectors, sample.flow_ds.vectors)


def test_zero_flip_probability_never_flips(fixture_root):
    sample = load_dataset(fixture_root)[0]
    assert augment(sample, draw=0.999, hflip_prob=0.0) is sample


# optimizer ------------------------------------------------------------------------------

def params_of(rng, shape=(3, 4)):
    return {"w": Tensor(rng.normal(size=shape), requires_grad=True, dtype=np.float32)}


def test_adam_zero_gradient_leaves_parameters(rng):
    params = params_of(rng)
    before = params["w"].data.copy()
    adam_step(params, {"w": np.zeros((3, 4), dtype=np.float32)}, AdamState.fresh(params), lr=1e-3)
    np.testing.assert_array_equal(params["w"].data, before)


def test_adam_missing_gradient_skips_the_parameter(rng):
    params = {**params_of(rng), "u": Tensor(rng.normal(size=(2,)), requires_grad=True, dtype=np.float32)}
    state = adam_step(params, {"w": rng.normal(size=(3, 4)).astype(np.float32)}, AdamState.fresh(params), lr=1e-3)
    w_before, u_before = params["w"].data.copy(), params["u"].data.copy()
    m_before, v_before = state.m["w"].copy(), state.v["w"].copy()
    state = adam_step(params, {"u": np.ones(2, dtype=np.float32)}, state, lr=1e-3)
    assert state.step == 2
    np.testing.assert_array_equal(params["w"].data, w_before)
    np.testing.assert_array_equal(state.m["w"], m_before)
    np.testing.assert_array_equal(state.v["w"], v_before)
    assert np.all(params["u"].data < u_before)


def test_adam_first_step_closed_form(rng):
    params = params_of(rng)
    before = params["w"].data.astype(np.float64)
    grad = rng.normal(size=(3, 4)).astype(np.float32)
    adam_step(params, {"w": grad}, AdamState.fresh(params), lr=1e-3)
    # bias correction turns the first moments back into g and g^2
    g = grad.astype(np.float64)
    np.testing.assert_allclose(params["w"].data, before - 1e-3 * g / (np.abs(g) + 1e-8), rtol=1e-6, atol=1e-6)


def test_adam_gradient_shape_mismatch(rng):
    params = params_of(rng)
    with pytest.raises(ShapeError, match="'w'"):
        adam_step(params, {"w": np.zeros((4, 3))}, AdamState.fresh(params), lr=1e-3)


def test_adam_state_roundtrip(tmp_path, rng):
    params = params_of(rng)
    state = adam_step(params, {"w": rng.normal(size=(3, 4)).astype(np.float32)}, AdamState.fresh(params), lr=1e-3)
    save_adam_state(tmp_path / "state.adam", state)
    restored = load_adam_state(tmp_path / "state.adam")
    assert restored.step == 1
    assert (restored.beta1, restored.beta2, restored.eps) == (0.9, 0.999, 1e-8)
    np.testing.assert_array_equal(restored.m["w"], state.m["w"])
    np.testing.assert_array_equal(restored.v["w"], state.v["w"])


# train_step -------------------------------------------------------------------------------

@pytest.fixture
def setup(make_config, test_backbone):
    def build(**overrides):
        config = make_config(**overrides)
        grams = prepare_style(load_style_image(config.style_image_path, config.resolution), test_backbone)
        model = ReCoNet.initialize(config.seed)
        return config, model, grams, AdamState.fresh(model.parameters(), config.adam)
    return build


def snapshot(model):
    return {name: p.data.copy() for name, p in model.parameters().items()}


def test_all_zero_weights_leave_parameters(setup, fixture_root, test_backbone):
    config, model, grams, state = setup(alpha=0, beta=0, gamma=0, lambda_f=0, lambda_o=0)
    before = snapshot(model)
    breakdown = train_step(model, load_dataset(fixture_root)[0], grams, config, state, backbone=test_backbone)
    assert breakdown.total == 0.0
    for name, p in model.parameters().items():
        np.testing.assert_array_equal(p.data, before[name])


def test_static_pair_has_zero_temporal_gradients(setup, test_backbone):
    config, model, grams, state = setup(alpha=0, beta=0, gamma=0)
    scene = make_translating_scene((64, 64), frames=2, velocity=(0, 0))
    sample = FramePairSample(prev=scene.frames[0], cur=scene.frames[0], flow=scene.flows[0], mask=scene.masks[0])
    model.zero_grad()
    breakdown = accumulate(model, test_backbone, sample, grams, config)
    assert breakdown.temporal_feature == 0.0
    assert breakdown.temporal_output == 0.0
    for p in model.parameters().values():
        assert p.grad is None or not np.any(p.grad)


def test_batch_accumulation_averages_sample_gradients(setup, fixture_root, test_backbone):
    config, model, grams, _ = setup()
    dataset = load_dataset(fixture_root)
    first, second = dataset[0], dataset[1]
    singles = []
    for sample in (first, second):
        model.zero_grad()
        accumulate(model, test_backbone, sample, grams, config)
        singles.append(snapshot_grads(model))
    model.zero_grad()
    for sample in (first, second):
        accumulate(model, test_backbone, sample, grams, config, scale=0.5)
    for name, grad in snapshot_grads(model).items():
        expected = (singles[0][name] + singles[1][name]) / 2
        np.testing.assert_allclose(grad, expected, rtol=1e-5, atol=1e-6 * (np.abs(expected).max() + 1e-30))


def snapshot_grads(model):
    return {name: (p.grad.copy() if p.grad is not None else np.zeros_like(p.data))
            for name, p in model.parameters().items()}


def test_backbone_and_inputs_collect_no_gradients(setup, fixture_root, test_backbone):
    config, model, grams, _ = setup()
    accumulate(model, test_backbone, load_dataset(fixture_root)[0], grams, config)
    assert all(t.grad is None for t in test_backbone.tensors.values())
    assert all(g.grad is None for g in grams.values())


def test_batch_schedule_is_resumable(make_config, fixture_root):
    config = make_config(batch_size=2, seed=5)
    dataset = load_dataset(fixture_root, seed=5)
    uninterrupted = BatchSchedule(dataset, config)
    names = [[s.name for s in uninterrupted.batch(step)] for step in range(1, 11)]
    resumed = BatchSchedule(dataset, config)
    assert [[s.name for s in resumed.batch(step)] for step in range(6, 11)] == names[5:]


# train --------------------------------------------------------------------------------------

def test_single_step_run(make_config, tmp_path):
    result = train(make_config(), progress=False)
    out = tmp_path / "run"
    rows = read_rows(result.loss_log)
    assert len(rows) == 1
    assert rows[0]["step"] == "1"
    for name in ("checkpoint_000001.rcnt", "checkpoint_000001.adam", "latest.rcnt", "latest.adam", "final.rcnt"):
        assert (out / name).is_file(), name
    assert not list(out.glob("*.tmp"))


def test_checkpoint_metadata_records_hyperparameters(make_config):
    result = train(make_config(), progress=False)
    _, metadata = load_checkpoint_file(result.checkpoint)
    assert metadata["step"] == "1"
    assert float(metadata["alpha"]) == 1.0
    assert float(metadata["beta"]) == 10.0
    assert float(metadata["gamma"]) == 1e-3
    assert float(metadata["lambda_f"]) == 1e7
    assert float(metadata["lambda_o"]) == 2e3
    assert float(metadata["learning_rate"]) == 1e-3
    assert metadata["resolution"] == "64x64"
    assert metadata["backbone"] == "test"
    assert metadata["temporal_variant"] == "rgb_lum"


def test_logged_totals_recompose(make_config):
    config = make_config(steps=3, checkpoint_every=5)
    rows = read_rows(train(config, progress=False).loss_log)
    weights = config.weights
    assert [row["step"] for row in rows] == ["1", "2", "3"]
    for row in rows:
        expected = (weights.alpha * float(row["content"]) + weights.beta * float(row["style"])
                    + weights.gamma * float(row["tv"]) + weights.lambda_f * float(row["temp_f"])
                    + weights.lambda_o * float(row["temp_o"]))
        assert float(row["total"]) == pytest.approx(expected, rel=1e-6)


def test_resume_matches_uninterrupted_run(make_config, tmp_path):
    straight = train(make_config(steps=3, out_dir=tmp_path / "straight"), progress=False)
    train(make_config(steps=2, out_dir=tmp_path / "split"), progress=False)
    resumed = train(make_config(steps=3, out_dir=tmp_path / "split",
                                resume=tmp_path / "split" / "checkpoint_000002.rcnt"), progress=False)
    a, _ = load_checkpoint_file(straight.checkpoint)
    b, _ = load_checkpoint_file(resumed.checkpoint)
    for (name, pa), pb in zip(a.parameters().items(), b.parameters().values()):
        np.testing.assert_array_equal(pa.data, pb.data, err_msg=name)
    assert read_rows(straight.loss_log) == read_rows(resumed.loss_log)


def test_resume_truncates_rows_past_the_checkpoint(make_config, tmp_path):
    out = tmp_path / "trunc"
    train(make_config(steps=3, out_dir=out), progress=False)
    result = train(make_config(steps=3, out_dir=out, resume=out / "checkpoint_000001.rcnt"), progress=False)
    assert [row["step"] for row in read_rows(result.loss_log)] == ["1", "2", "3"]


def test_resume_rejects_optimizer_state_from_another_step(make_config, tmp_path):
    out = tmp_path / "torn"
    train(make_config(steps=2, out_dir=out), progress=False)
    (out / "checkpoint_000001.adam").write_bytes((out / "checkpoint_000002.adam").read_bytes())
    with pytest.raises(CheckpointError, match="disagree"):
        train(make_config(steps=3, out_dir=out, resume=out / "checkpoint_000001.rcnt"), progress=False)


def test_missing_style_image_is_a_config_error(make_config, tmp_path):
    with pytest.raises(ConfigError, match="Style image not found"):
        train(make_config(style_image_path=tmp_path / "nope.png"), progress=False)


def test_vgg16_without_weights_is_a_config_error(make_config):
    with pytest.raises(ConfigError, match="weight file"):
        train(make_config(backbone="vgg16"), progress=False)


# desk-scale runs ---------------------------------------------------------------------------------

def held_out_scene():
    return make_translating_scene((64, 64), frames=6, velocity=(2, 1), seed=100, name="held_out")


@pytest.mark.slow
def test_desk_scale_training_reduces_loss_and_flicker(make_config):
    config = make_config(steps=500, checkpoint_every=250, log_every=50)
    result = train(config, progress=False)
    totals = [float(row["total"]) for row in read_rows(result.loss_log)]
    assert np.mean(totals[-10:]) <= 0.5 * totals[0]

    trained, _ = load_checkpoint_file(result.checkpoint)
    scene = held_out_scene()
    assert e_stab(stylized(trained, scene)) <= 0.5 * e_stab(stylized(ReCoNet.initialize(config.seed), scene))


@pytest.mark.slow
def test_both_temporal_levels_beat_feature_only(make_config, tmp_path):
    scene = held_out_scene()
    medians = {}
    for levels in ("both", "feature"):
        scores = []
        for seed in range(3):
            config = make_config(steps=200, checkpoint_every=200, log_every=50, seed=seed,
                                 temporal_levels=levels, out_dir=tmp_path / f"{levels}_{seed}")
            model, _ = load_checkpoint_file(train(config, progress=False).checkpoint)
            scores.append(e_stab(stylized(model, scene)))
        medians[levels] = float(np.median(scores))
    assert medians["both"] <= medians["feature"]


def test_effective_weights_drop_the_ablated_level(make_config):
    assert make_config(temporal_levels="feature").effective_weights().lambda_o == 0.0
    assert make_config(temporal_levels="output").effective_weights().lambda_f == 0.0
    assert make_config(temporal_levels="both").effective_weights() == LossWeights()
