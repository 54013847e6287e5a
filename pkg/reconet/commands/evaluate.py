# reconet/commands/evaluate.py
import argparse
import csv
import logging
from pathlib import Path

from reconet.config import dump_key_values
from reconet.evaluation.histogram import warp_error_histogram
from reconet.evaluation.maps import DEFAULT_ERR_SCALE, temporal_error_maps, write_error_maps
from reconet.evaluation.stability import scene_stability
from reconet.schemas.command import CommandSpec
from reconet.training.dataset import load_scene
from reconet.utils.errors import ConfigError

from .common import EXIT_OK, guarded

logger = logging.getLogger(__name__)


def _scene_pairs(args: argparse.Namespace):
    frames = args.frames or []
    if frames and len(frames) != len(args.scene):
        raise ConfigError(
            message="Mismatched --scene/--frames",
            details=f"{len(args.scene)} scenes but {len(frames)} frame directories",
            example="eval estab --scene data/s1 --frames out/s1 --scene data/s2 --frames out/s2"
        )
    return [(Path(scene), Path(frames[i]) if frames else None) for i, scene in enumerate(args.scene)]


def run_estab(args: argparse.Namespace, spec: CommandSpec) -> int:
    scenes = [load_scene(scene, frames) for scene, frames in _scene_pairs(args)]
    report = scene_stability(scenes)
    values = {f"e_stab.{name}": f"{value:.6f}" for name, value in report.scenes.items()}
    values["e_stab.average"] = f"{report.average:.6f}"
    (spec.out_dir / "estab.txt").write_text(dump_key_values(values), encoding="utf-8")
    for name, value in report.scenes.items():
        print(f"{name} {value:.6f}")
    if len(report.scenes) > 1:
        print(f"average {report.average:.6f}")
    return EXIT_OK


def run_hist(args: argparse.Namespace, spec: CommandSpec) -> int:
    scene, frames = _scene_pairs(args)[0]
    report = warp_error_histogram(load_scene(scene, frames), args.colorspace.upper(), bins=args.bins)
    csv_path = spec.out_dir / f"histogram_{report.colorspace.lower()}.csv"
    with csv_path.open("w", newline="", encoding="utf-8") as handle:
        csv.writer(handle).writerows(report.csv_rows())
    summary = {"colorspace": report.colorspace, "bins": str(len(report.bin_edges) - 1),
               "sample_count": str(report.sample_count), "csv": csv_path.name}
    (spec.out_dir / "hist.txt").write_text(dump_key_values(summary), encoding="utf-8")
    print(dump_key_values(summary), end="")
    return EXIT_OK


def run_maps(args: argparse.Namespace, spec: CommandSpec) -> int:
    scene, frames = _scene_pairs(args)[0]
    if frames is None:
        raise ConfigError(message="maps needs stylized frames", details="pass --frames with the stylized output directory")
    inputs = load_scene(scene)
    outputs = load_scene(scene, frames)
    written = write_error_maps(temporal_error_maps(outputs, inputs), spec.out_dir, args.err_scale)
    print(f"maps={len(written)} err_scale={args.err_scale:.2f}")
    return EXIT_OK


RUNNERS = {"estab": run_estab, "hist": run_hist, "maps": run_maps}


def cmd_eval(args: argparse.Namespace, spec: CommandSpec) -> int:
    spec.out_dir.mkdir(parents=True, exist_ok=True)
    return RUNNERS[args.kind](args, spec)


def register(subparsers) -> None:
    parser = subparsers.add_parser("eval", help="Temporal stability, histograms and error maps")
    kinds = parser.add_subparsers(dest="kind", required=True)
    for kind, help_text in (("estab", "Temporal error e_stab per scene"),
                            ("hist", "Histogram of warping error"),
                            ("maps", "Total and luminance-wise error maps")):
        sub = kinds.add_parser(kind, help=help_text)
        sub.add_argument("--scene", action="append", required=True, help="Scene directory with flow/ and mask/")
        sub.add_argument("--frames", action="append", help="Frames to evaluate (default: the scene's own)")
        sub.add_argument("--out", help="Output directory")
        if kind == "hist":
            sub.add_argument("--colorspace", type=str.lower, choices=["rgb", "xyz"], default="rgb")
            sub.add_argument("--bins", type=int, default=64)
        if kind == "maps":
            sub.add_argument("--err-scale", type=float, default=DEFAULT_ERR_SCALE)
        sub.set_defaults(handler=guarded(cmd_eval))
