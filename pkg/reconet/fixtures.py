# reconet/fixtures.py
"""Synthetic translating-texture scenes with known integer flows.

Frame t is the periodic texture rolled by t * velocity, so the sampling flow
of every transition is exactly -velocity. The band that wraps around the
border has no source inside the previous frame and is masked out.
"""
import logging
from pathlib import Path
from typing import List, Optional, Tuple

import numpy as np

from reconet.flow.flo import save_flo
from reconet.models.flow import FlowField, OcclusionMask
from reconet.models.sample import SceneSequence
from reconet.training.dataset import DEFAULT_LAYOUT
from reconet.utils.imageio import frame_name, to_uint8, write_image, write_mask

logger = logging.getLogger(__name__)

STYLE_NAME = "style.png"


def make_texture(width: int, height: int, seed: int = 0, waves: int = 4) -> np.ndarray:
    """Sum of random sinusoids whose periods divide the frame, quantised to 8 bits."""
    rng = np.random.default_rng(seed)
    ys, xs = np.mgrid[0:height, 0:width]
    texture = np.zeros((3, height, width))
    for c in range(3):
        for _ in range(waves):
            kx, ky = rng.integers(1, 4, size=2)
            phase = rng.uniform(0, 2 * np.pi)
            texture[c] += np.sin(2 * np.pi * (kx * xs / width + ky * ys / height) + phase)
    texture = 0.5 + 0.4 * texture / waves
    return to_uint8(texture).astype(np.float32) / 255.0


def wrap_mask(height: int, width: int, velocity: Tuple[int, int]) -> OcclusionMask:
    """Zero where p - velocity leaves the frame: the rows and columns filled by the wrap."""
    vx, vy = velocity
    values = np.ones((height, width), dtype=np.float32)
    if vx > 0:
        values[:, :vx] = 0.0
    elif vx < 0:
        values[:, width + vx:] = 0.0
    if vy > 0:
        values[:vy, :] = 0.0
    elif vy < 0:
        values[height + vy:, :] = 0.0
    return OcclusionMask(values=values)


def make_translating_scene(
    size: Tuple[int, int] = (64, 64),
    frames: int = 10,
    velocity: Tuple[int, int] = (2, 1),
    seed: int = 0,
    name: str = "translate",
) -> SceneSequence:
    width, height = size
    vx, vy = velocity
    texture = make_texture(width, height, seed)
    images = [np.roll(texture, shift=(vy * t, vx * t), axis=(1, 2)) for t in range(frames)]
    flows = [FlowField.constant(height, width, -vx, -vy) for _ in range(frames - 1)]
    masks = [wrap_mask(height, width, velocity) for _ in range(frames - 1)]
    return SceneSequence(frames=images, flows=flows, masks=masks, name=name)


def make_style_image(size: Tuple[int, int] = (64, 64), seed: int = 0) -> np.ndarray:
    """High-contrast diagonal colour bands."""
    width, height = size
    rng = np.random.default_rng(seed)
    ys, xs = np.mgrid[0:height, 0:width]
    bands = ((xs + ys) // max(2, min(width, height) // 8)) % 4
    palette = rng.uniform(0.05, 0.95, size=(4, 3))
    return np.ascontiguousarray(palette[bands].transpose(2, 0, 1), dtype=np.float32)


def write_scene(scene_dir: Path, scene: SceneSequence, velocity: Tuple[int, int], backward: bool = True) -> None:
    """frame_%04d.png frames; flow/ holds the forward push flow (+velocity), flow_bwd/ its pull counterpart."""
    scene_dir = Path(scene_dir)
    for sub in (DEFAULT_LAYOUT.flow_dir, DEFAULT_LAYOUT.mask_dir) + ((DEFAULT_LAYOUT.flow_bwd_dir,) if backward else ()):
        (scene_dir / sub).mkdir(parents=True, exist_ok=True)
    height, width = scene.frames[0].shape[1:]
    for t, frame in enumerate(scene.frames, start=1):
        write_image(scene_dir / frame_name(t), frame)
    for t, (flow, mask) in enumerate(zip(scene.flows, scene.masks), start=2):
        save_flo(scene_dir / DEFAULT_LAYOUT.flow_dir / frame_name(t, ".flo"),
                 FlowField.constant(height, width, velocity[0], velocity[1]))
        if backward:
            save_flo(scene_dir / DEFAULT_LAYOUT.flow_bwd_dir / frame_name(t, ".flo"), flow)
        write_mask(scene_dir / DEFAULT_LAYOUT.mask_dir / frame_name(t), mask)


def scene_velocity(index: int) -> Tuple[int, int]:
    return (index % 3) + 1, index % 2


def write_fixture_dataset(
    root: Path,
    scenes: int = 1,
    frames: int = 10,
    size: Tuple[int, int] = (64, 64),
    seed: int = 0,
    velocities: Optional[List[Tuple[int, int]]] = None,
    backward: bool = True,
) -> Path:
    """Write scenes, a manifest and a style image under root; returns root."""
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    names = []
    for index in range(scenes):
        velocity = velocities[index] if velocities else scene_velocity(index)
        name = f"scene_{index:02d}"
        scene = make_translating_scene(size, frames, velocity, seed + index, name)
        write_scene(root / name, scene, velocity, backward)
        names.append(name)
    (root / DEFAULT_LAYOUT.manifest).write_text("".join(f"{n}\n" for n in names), encoding="utf-8")
    write_image(root / STYLE_NAME, make_style_image(size, seed))
    logger.info(f"Wrote {scenes} fixture scene(s) of {frames} frames to {root}")
    return root
