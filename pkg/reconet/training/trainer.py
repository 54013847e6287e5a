# reconet/training/trainer.py
import csv
import logging
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Union

import numpy as np
from pydantic import BaseModel, ConfigDict
from tqdm import tqdm

from reconet.config import get_settings
from reconet.engine import ops
from reconet.engine.tensor import Tape, Tensor
from reconet.losses import TwoFrameBundle, style_grams, total_loss
from reconet.models.sample import FramePairSample
from reconet.schemas.loss import CSV_HEADER, LossBreakdown
from reconet.schemas.training import TrainConfig
from reconet.stylenet.backbone import PerceptualBackbone, build_backbone
from reconet.stylenet.checkpoint import load_checkpoint_file, save_checkpoint, write_atomic
from reconet.stylenet.network import ReCoNet
from reconet.utils.errors import CheckpointError, ConfigError, NumericError
from reconet.utils.imageio import read_image, resize_image

from .dataset import FramePairDataset, augment, load_dataset
from .optim import AdamState, adam_step, load_adam_state, save_adam_state

logger = logging.getLogger(__name__)

LOG_NAME = "loss_log.csv"
LATEST_NAME = "latest.rcnt"
FINAL_NAME = "final.rcnt"


class TrainResult(BaseModel):
    checkpoint: Path
    loss_log: Path
    steps: int
    last: Optional[LossBreakdown] = None

    model_config = ConfigDict(arbitrary_types_allowed=True)


def checkpoint_name(step: int) -> str:
    return f"checkpoint_{step:06d}.rcnt"


def optimizer_path(checkpoint: Path) -> Path:
    """Adam state lives next to its checkpoint: checkpoint_000050.rcnt -> checkpoint_000050.adam"""
    return Path(checkpoint).with_suffix(".adam")


def load_style_image(style_image_path: Path, resolution) -> np.ndarray:
    """The style image resized to the training resolution."""
    path = Path(style_image_path)
    if not path.is_file():
        raise ConfigError(
            message="Style image not found",
            details=f"No style image at: {path}",
            example="style_image_path=styles/mosaic.png"
        )
    width, height = resolution
    return resize_image(read_image(path), width, height)


def prepare_style(style_image: np.ndarray, backbone: PerceptualBackbone) -> Dict[str, Tensor]:
    """Gram targets of the style image, computed once per run."""
    return style_grams(backbone.features(Tensor(style_image)))


def forward_pair(
    model: ReCoNet,
    backbone: PerceptualBackbone,
    sample: FramePairSample,
    grams: Dict[str, Tensor],
    variant: str = "rgb_lum",
) -> TwoFrameBundle:
    """Two runs through encoder/decoder plus backbone taps of inputs and outputs."""
    dtype = model.parameters()["encoder.conv1.weight"].dtype
    i_prev = Tensor(sample.prev, dtype=dtype)
    i_cur = Tensor(sample.cur, dtype=dtype)
    f_prev = model.encode(i_prev)
    o_prev = model.decode(f_prev)
    f_cur = model.encode(i_cur)
    o_cur = model.decode(f_cur)
    return TwoFrameBundle(
        inputs_prev=sample.prev,
        inputs_cur=sample.cur,
        outputs_prev=o_prev,
        outputs_cur=o_cur,
        features_prev=f_prev,
        features_cur=f_cur,
        out_feats_prev=backbone.features(o_prev),
        out_feats_cur=backbone.features(o_cur),
        in_feats_prev=backbone.features(i_prev),
        in_feats_cur=backbone.features(i_cur),
        style_grams=grams,
        flow=sample.flow,
        mask=sample.mask,
        flow_ds=sample.flow_ds,
        mask_ds=sample.mask_ds,
        variant=variant,
    )


def accumulate(
    model: ReCoNet,
    backbone: PerceptualBackbone,
    sample: FramePairSample,
    grams: Dict[str, Tensor],
    config: TrainConfig,
    scale: float = 1.0,
) -> LossBreakdown:
    """Forward and backward one sample, adding scale * dLoss/dparam into the parameter grads."""
    with Tape() as tape:
        breakdown = total_loss(forward_pair(model, backbone, sample, grams, config.temporal_variant),
                               config.effective_weights())
        bad = breakdown.first_non_finite()
        if bad is not None:
            raise NumericError(
                message="Non-finite loss",
                details=f"term '{bad}' is not finite on sample '{sample.name}'",
                example="Lower the learning rate or the temporal weights"
            )
        tape.backward(ops.mul_scalar(breakdown.graph_total, scale))
    breakdown._graph_total = None
    return breakdown


def train_step(
    model: ReCoNet,
    batch: Union[FramePairSample, Sequence[FramePairSample]],
    grams: Dict[str, Tensor],
    config: TrainConfig,
    adam_state: AdamState,
    backbone: PerceptualBackbone,
) -> LossBreakdown:
    """One optimizer update over a batch, realized as mean-reduced gradient accumulation."""
    samples = [batch] if isinstance(batch, FramePairSample) else list(batch)
    params = model.parameters()
    model.zero_grad()
    parts = [accumulate(model, backbone, sample, grams, config, scale=1.0 / len(samples)) for sample in samples]
    adam_step(params, {name: p.grad for name, p in params.items()}, adam_state, config.learning_rate)
    return LossBreakdown.mean(config.effective_weights(), parts)


class BatchSchedule:
    """Deterministic sample order and flip draws keyed on the global sample index.

    Epoch e walks a permutation seeded by (seed, e); the flip draw of sample g is
    seeded by g as well, so a resumed run sees exactly what an uninterrupted one does.
    """

    def __init__(self, dataset: FramePairDataset, config: TrainConfig):
        self.dataset = dataset
        self.config = config
        self._orders: Dict[int, np.ndarray] = {}

    def _order(self, epoch: int) -> np.ndarray:
        if epoch not in self._orders:
            if epoch == 0:
                self._orders[epoch] = np.arange(len(self.dataset))
            else:
                self._orders[epoch] = np.random.default_rng((self.config.seed, epoch)).permutation(len(self.dataset))
            # one epoch of lookback is all a sequential run needs
            self._orders.pop(epoch - 2, None)
        return self._orders[epoch]

    def draw(self, global_index: int) -> float:
        return float(np.random.default_rng((self.config.seed, 1, global_index)).random())

    def batch(self, step: int) -> List[FramePairSample]:
        samples = []
        for micro in range(self.config.batch_size):
            g = (step - 1) * self.config.batch_size + micro
            epoch, position = divmod(g, len(self.dataset))
            sample = self.dataset[int(self._order(epoch)[position])]
            samples.append(augment(sample, self.draw(g), self.config.hflip_prob))
        return samples


def checkpoint_metadata(config: TrainConfig, step: int) -> Dict[str, str]:
    weights = config.weights
    return {
        "format": "reconet",
        "step": str(step),
        "config_hash": config.config_hash(),
        "alpha": repr(weights.alpha),
        "beta": repr(weights.beta),
        "gamma": repr(weights.gamma),
        "lambda_f": repr(weights.lambda_f),
        "lambda_o": repr(weights.lambda_o),
        "learning_rate": repr(config.learning_rate),
        "batch_size": str(config.batch_size),
        "seed": str(config.seed),
        "resolution": f"{config.resolution[0]}x{config.resolution[1]}",
        "backbone": config.backbone,
        "temporal_variant": config.temporal_variant,
        "temporal_levels": config.temporal_levels,
    }


def save_training_state(out_dir: Path, model: ReCoNet, adam_state: AdamState, config: TrainConfig, step: int) -> Path:
    data = save_checkpoint(model, checkpoint_metadata(config, step))
    path = out_dir / checkpoint_name(step)
    write_atomic(path, data)
    save_adam_state(optimizer_path(path), adam_state)
    # latest.rcnt last; resume rejects a pair whose steps disagree
    save_adam_state(optimizer_path(out_dir / LATEST_NAME), adam_state)
    write_atomic(out_dir / LATEST_NAME, data)
    logger.info(f"Saved checkpoint at step {step}: {path}")
    return path


def _prepare_log(path: Path, resume_step: int) -> None:
    """Fresh log with a header, or on resume drop rows past the checkpoint step."""
    if resume_step == 0 or not path.is_file():
        with path.open("w", newline="", encoding="utf-8") as handle:
            csv.writer(handle).writerow(CSV_HEADER)
        return
    with path.open(newline="", encoding="utf-8") as handle:
        rows = list(csv.reader(handle))
    kept = [rows[0]] + [row for row in rows[1:] if row and int(row[0]) <= resume_step]
    with path.open("w", newline="", encoding="utf-8") as handle:
        csv.writer(handle).writerows(kept)


def _resume(config: TrainConfig):
    model, metadata = load_checkpoint_file(config.resume)
    if metadata.get("config_hash") != config.config_hash():
        logger.warning(f"Resuming {config.resume} with a different config (hash {metadata.get('config_hash')})")
    try:
        step = int(metadata["step"])
    except (KeyError, ValueError) as e:
        raise CheckpointError(message="Checkpoint has no step", details=f"{config.resume}: {e}") from e
    adam_state = load_adam_state(optimizer_path(config.resume))
    if adam_state.step != step:
        raise CheckpointError(
            message="Checkpoint and optimizer state disagree",
            details=f"{config.resume} is at step {step} but {optimizer_path(config.resume).name} is at step {adam_state.step}",
            example="Resume from a checkpoint_NNNNNN.rcnt written together with its .adam file"
        )
    return model, adam_state, step


def train(config: TrainConfig, progress: bool = True) -> TrainResult:
    if config.dataset_root is None or config.style_image_path is None:
        raise ConfigError(
            message="Training needs a dataset and a style image",
            details="dataset_root and style_image_path must both be set",
            example="dataset_root=data/fixture\nstyle_image_path=data/fixture/style.png"
        )
    out_dir = Path(config.out_dir or Path(get_settings().OUTPUT_DIR) / "train")
    out_dir.mkdir(parents=True, exist_ok=True)

    style_image = load_style_image(config.style_image_path, config.resolution)
    backbone = build_backbone(config.backbone, config.backbone_weights, seed=config.seed)
    grams = prepare_style(style_image, backbone)
    dataset = load_dataset(config.dataset_root, resolution=config.resolution, seed=config.seed)
    schedule = BatchSchedule(dataset, config)

    if config.resume is not None:
        model, adam_state, start = _resume(config)
        logger.info(f"Resuming from {config.resume} at step {start}")
    else:
        model = ReCoNet.initialize(config.seed)
        adam_state = AdamState.fresh(model.parameters(), config.adam)
        start = 0

    log_path = out_dir / LOG_NAME
    _prepare_log(log_path, start)
    last: Optional[LossBreakdown] = None

    with log_path.open("a", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        bar = tqdm(range(start + 1, config.steps + 1), desc="train", disable=not progress,
                   initial=start, total=config.steps)
        for step in bar:
            last = train_step(model, schedule.batch(step), grams, config, adam_state, backbone)
            writer.writerow(last.csv_row(step))
            handle.flush()
            bar.set_postfix(total=f"{last.total:.4g}")
            if step % config.log_every == 0 or step == 1:
                logger.info(
                    f"step {step}: total={last.total:.6g} content={last.content:.6g} style={last.style:.6g} "
                    f"tv={last.tv:.6g} temp_f={last.temporal_feature:.6g} temp_o={last.temporal_output:.6g}"
                )
            if step % config.checkpoint_every == 0 or step == config.steps:
                save_training_state(out_dir, model, adam_state, config, step)

    final = out_dir / FINAL_NAME
    write_atomic(final, save_checkpoint(model, checkpoint_metadata(config, max(config.steps, start))))
    logger.info(f"Training finished: {final}")
    return TrainResult(checkpoint=final, loss_log=log_path, steps=config.steps, last=last)
