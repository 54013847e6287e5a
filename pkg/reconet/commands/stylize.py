# reconet/commands/stylize.py
import argparse
import logging
import os
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Optional

from reconet.config import get_settings
from reconet.schemas.command import CommandSpec
from reconet.stylenet.checkpoint import load_checkpoint_file
from reconet.stylenet.network import ReCoNet
from reconet.utils.errors import DatasetError, ShapeError
from reconet.utils.imageio import list_frames, read_image, write_image

from .common import EXIT_INPUT, EXIT_OK, guarded, write_manifest

logger = logging.getLogger(__name__)


def worker_count(requested: Optional[int] = None) -> int:
    """--threads, capped by RECONET_THREADS (0 means the cpu count)."""
    cap = get_settings().THREADS or os.cpu_count() or 1
    return max(1, min(requested, cap) if requested else cap)


def stylize_frame(model: ReCoNet, source: Path, target: Path) -> bool:
    """Stylize one frame on its own; no state carries over between frames."""
    try:
        frame = read_image(source)
    except DatasetError as e:
        logger.warning(f"Skipping unreadable frame {source}: {e}")
        return False
    height, width = frame.shape[1:]
    if height % 4 or width % 4:
        raise ShapeError(
            message="Frame size must be divisible by 4",
            details=f"{source.name} is {width}x{height}",
            example="Resize frames to e.g. 640x360 before stylizing"
        )
    write_image(target, model.stylize_array(frame))
    return True


def cmd_stylize(args: argparse.Namespace, spec: CommandSpec) -> int:
    model, metadata = load_checkpoint_file(args.checkpoint)
    frames = list_frames(Path(args.frames))
    threads = worker_count(args.threads)
    write_manifest(spec, {"frames": str(len(frames)), "threads": str(threads),
                          "checkpoint_step": metadata.get("step", "")})
    spec.out_dir.mkdir(parents=True, exist_ok=True)

    with ThreadPoolExecutor(max_workers=threads) as pool:
        results = list(pool.map(lambda item: stylize_frame(model, item[1], spec.out_dir / item[1].name), frames))

    skipped = results.count(False)
    logger.info(f"Stylized {len(results) - skipped} of {len(frames)} frames into {spec.out_dir}")
    return EXIT_INPUT if skipped else EXIT_OK


def register(subparsers) -> None:
    parser = subparsers.add_parser("stylize", help="Stylize numbered frames one by one")
    parser.add_argument("--checkpoint", required=True)
    parser.add_argument("--frames", required=True, help="Directory of frame_%%04d.png inputs")
    parser.add_argument("--out", help="Output directory")
    parser.add_argument("--threads", type=int, help="Worker pool size (default RECONET_THREADS)")
    parser.set_defaults(handler=guarded(cmd_stylize))
