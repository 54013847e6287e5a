# reconet/utils/imageio.py
import re
from pathlib import Path
from typing import List, Tuple

import numpy as np
from PIL import Image, UnidentifiedImageError

from reconet.models.flow import OcclusionMask
from reconet.utils.errors import DatasetError

FRAME_PATTERN = re.compile(r"^frame_(\d+)\.(png|flo|pgm)$")


def frame_name(index: int, suffix: str = ".png") -> str:
    return f"frame_{index:04d}{suffix}"


def frame_index(path: Path) -> int:
    match = FRAME_PATTERN.match(Path(path).name)
    if not match:
        raise DatasetError(
            message="Unexpected frame name",
            details=f"'{Path(path).name}' does not follow frame_%04d naming",
            example="frame_0001.png"
        )
    return int(match.group(1))


def list_frames(directory: Path, suffix: str = ".png") -> List[Tuple[int, Path]]:
    """Numbered frames in a directory, sorted numerically (frame_10 after frame_9)."""
    found = []
    for path in Path(directory).iterdir():
        match = FRAME_PATTERN.match(path.name)
        if match and path.suffix == suffix:
            found.append((int(match.group(1)), path))
    return sorted(found)


def read_image(path: Path) -> np.ndarray:
    """8-bit image -> (3, H, W) float32 in [0, 1]."""
    try:
        with Image.open(path) as image:
            array = np.asarray(image.convert("RGB"), dtype=np.float32)
    except (OSError, UnidentifiedImageError) as e:
        raise DatasetError(message="Unreadable image", details=f"{path}: {e}") from e
    return np.ascontiguousarray(array.transpose(2, 0, 1) / 255.0, dtype=np.float32)


def to_uint8(array: np.ndarray) -> np.ndarray:
    return np.clip(np.rint(array * 255.0), 0, 255).astype(np.uint8)


def write_image(path: Path, array: np.ndarray) -> None:
    """(3, H, W) float in [0, 1] -> 8-bit RGB PNG."""
    Image.fromarray(np.ascontiguousarray(to_uint8(array).transpose(1, 2, 0))).save(path)


def write_gray(path: Path, array: np.ndarray) -> None:
    """(H, W) uint8 -> single-channel PNG/PGM."""
    Image.fromarray(np.ascontiguousarray(array, dtype=np.uint8)).save(path)


def resize_image(array: np.ndarray, width: int, height: int) -> np.ndarray:
    if array.shape[1:] == (height, width):
        return array
    channels = [
        np.asarray(Image.fromarray(np.ascontiguousarray(c, dtype=np.float32)).resize((width, height), Image.Resampling.BILINEAR))
        for c in array
    ]
    return np.clip(np.stack(channels), 0.0, 1.0).astype(np.float32)


def read_mask(path: Path) -> OcclusionMask:
    """8-bit single-channel mask: 0 = untraceable, 255 = traceable."""
    try:
        with Image.open(path) as image:
            values = np.asarray(image.convert("L"))
    except (OSError, UnidentifiedImageError) as e:
        raise DatasetError(message="Unreadable mask", details=f"{path}: {e}") from e
    return OcclusionMask(values=(values >= 128).astype(np.float32))


def write_mask(path: Path, mask: OcclusionMask) -> None:
    write_gray(path, (mask.values * 255).astype(np.uint8))
