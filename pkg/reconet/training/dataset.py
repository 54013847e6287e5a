# reconet/training/dataset.py
import logging
from pathlib import Path
from typing import List, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ValidationError

from reconet.flow.flo import load_flo
from reconet.flow.transforms import flip_horizontal, resize_flow, resize_mask, sampling_flow
from reconet.models.flow import FlowField, OcclusionMask
from reconet.models.sample import FramePairSample, SceneSequence
from reconet.utils.errors import DatasetError
from reconet.utils.imageio import frame_name, list_frames, read_image, read_mask, resize_image

logger = logging.getLogger(__name__)


class DatasetLayout(BaseModel):
    """Per-scene folders of frame_%04d.png with sibling flow/, flow_bwd/ and mask/
    directories whose files are indexed by the later frame of each pair."""
    manifest: str = "manifest.txt"
    flow_dir: str = "flow"
    flow_bwd_dir: str = "flow_bwd"
    mask_dir: str = "mask"
    mask_suffixes: Tuple[str, ...] = (".png", ".pgm")


DEFAULT_LAYOUT = DatasetLayout()


class PairRef(BaseModel):
    scene: str
    scene_dir: Path
    prev_index: int
    cur_index: int
    prev_path: Path
    cur_path: Path
    flow_path: Path
    flow_bwd_path: Optional[Path] = None
    mask_path: Path

    @property
    def name(self) -> str:
        return f"{self.scene}/{self.cur_index:04d}"


def read_scene_names(root: Path, layout: DatasetLayout = DEFAULT_LAYOUT) -> List[str]:
    manifest = Path(root) / layout.manifest
    if not manifest.is_file():
        raise DatasetError(
            message="Dataset manifest not found",
            details=f"No {layout.manifest} in {root}",
            example="One scene directory name per line"
        )
    return [line.strip() for line in manifest.read_text(encoding="utf-8").splitlines()
            if line.strip() and not line.strip().startswith("#")]


def _find_mask(scene_dir: Path, index: int, layout: DatasetLayout) -> Optional[Path]:
    for suffix in layout.mask_suffixes:
        path = scene_dir / layout.mask_dir / frame_name(index, suffix)
        if path.is_file():
            return path
    return None


def scan_scene(scene: str, scene_dir: Path, layout: DatasetLayout = DEFAULT_LAYOUT) -> List[PairRef]:
    """Pair up consecutive frames; pairs without a flow or mask are skipped."""
    if not scene_dir.is_dir():
        logger.warning(f"Scene '{scene}' listed in the manifest has no directory at {scene_dir}")
        return []
    frames = list_frames(scene_dir)
    refs = []
    for (prev_index, prev_path), (cur_index, cur_path) in zip(frames, frames[1:]):
        flow_path = scene_dir / layout.flow_dir / frame_name(cur_index, ".flo")
        mask_path = _find_mask(scene_dir, cur_index, layout)
        if not flow_path.is_file() or mask_path is None:
            missing = "flow" if not flow_path.is_file() else "mask"
            logger.warning(f"Skipping pair {scene}/{prev_index:04d}-{cur_index:04d}: missing {missing}")
            continue
        bwd_path = scene_dir / layout.flow_bwd_dir / frame_name(cur_index, ".flo")
        refs.append(PairRef(
            scene=scene, scene_dir=scene_dir, prev_index=prev_index, cur_index=cur_index,
            prev_path=prev_path, cur_path=cur_path, flow_path=flow_path,
            flow_bwd_path=bwd_path if bwd_path.is_file() else None, mask_path=mask_path,
        ))
    return refs


def read_transition(
    flow_path: Path,
    mask_path: Path,
    flow_bwd_path: Optional[Path] = None,
    resolution: Optional[Tuple[int, int]] = None,
) -> Tuple[FlowField, OcclusionMask]:
    forward = load_flo(flow_path)
    backward = load_flo(flow_bwd_path) if flow_bwd_path is not None else None
    flow = sampling_flow(forward, backward)
    mask = read_mask(mask_path)
    if resolution is not None:
        width, height = resolution
        flow = resize_flow(flow, width, height)
        mask = resize_mask(mask, width, height)
    return flow, mask


def load_pair(ref: PairRef, resolution: Optional[Tuple[int, int]] = None) -> FramePairSample:
    prev = read_image(ref.prev_path)
    cur = read_image(ref.cur_path)
    if resolution is not None:
        width, height = resolution
        prev = resize_image(prev, width, height)
        cur = resize_image(cur, width, height)
    flow, mask = read_transition(ref.flow_path, ref.mask_path, ref.flow_bwd_path, resolution)
    try:
        return FramePairSample(prev=prev, cur=cur, flow=flow, mask=mask, name=ref.name)
    except ValidationError as e:
        raise DatasetError(message="Inconsistent frame pair", details=f"{ref.name}: {e}") from e


class FramePairDataset(Sequence):
    """Shuffled frame pairs, loaded from disk on access."""

    def __init__(self, refs: List[PairRef], resolution: Optional[Tuple[int, int]] = None):
        self.refs = refs
        self.resolution = resolution

    def __len__(self) -> int:
        return len(self.refs)

    def __getitem__(self, index: int) -> FramePairSample:
        return load_pair(self.refs[index], self.resolution)


def load_dataset(
    root: Path,
    layout: DatasetLayout = DEFAULT_LAYOUT,
    resolution: Optional[Tuple[int, int]] = None,
    seed: int = 0,
) -> FramePairDataset:
    root = Path(root)
    refs: List[PairRef] = []
    for scene in read_scene_names(root, layout):
        refs.extend(scan_scene(scene, root / scene, layout))
    if not refs:
        raise DatasetError(
            message="Empty dataset",
            details=f"No usable frame pairs under {root}",
            example="Each scene needs frame_%04d.png files plus flow/ and mask/ entries"
        )
    order = np.random.default_rng(seed).permutation(len(refs))
    logger.info(f"Loaded {len(refs)} frame pairs from {root}")
    return FramePairDataset([refs[i] for i in order], resolution)


def load_scene(
    scene_dir: Path,
    frames_dir: Optional[Path] = None,
    layout: DatasetLayout = DEFAULT_LAYOUT,
) -> SceneSequence:
    """Frames (from frames_dir, default the scene itself) with the scene's flows and masks."""
    scene_dir = Path(scene_dir)
    frames = list_frames(frames_dir or scene_dir)
    flows, masks = [], []
    for index, _ in frames[1:]:
        flow_path = scene_dir / layout.flow_dir / frame_name(index, ".flo")
        mask_path = _find_mask(scene_dir, index, layout)
        if not flow_path.is_file() or mask_path is None:
            continue
        bwd_path = scene_dir / layout.flow_bwd_dir / frame_name(index, ".flo")
        flow, mask = read_transition(flow_path, mask_path, bwd_path if bwd_path.is_file() else None)
        flows.append(flow)
        masks.append(mask)
    try:
        return SceneSequence(frames=[read_image(path) for _, path in frames], flows=flows, masks=masks,
                             name=scene_dir.name)
    except ValidationError as e:
        raise DatasetError(
            message="Mismatched sequence lengths",
            details=f"{len(frames)} frames, {len(flows)} flows, {len(masks)} masks: {e.errors()[0]['msg']}"
        ) from e


def augment(sample: FramePairSample, draw: float, hflip_prob: float = 0.5) -> FramePairSample:
    """Jointly mirror frames, flow (dx negated) and masks when draw >= 1 - hflip_prob."""
    if draw < 1.0 - hflip_prob:
        return sample
    return FramePairSample(
        prev=flip_horizontal(sample.prev),
        cur=flip_horizontal(sample.cur),
        flow=flip_horizontal(sample.flow),
        mask=flip_horizontal(sample.mask),
        flow_ds=flip_horizontal(sample.flow_ds),
        mask_ds=flip_horizontal(sample.mask_ds),
        name=sample.name,
    )
