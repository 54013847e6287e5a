# reconet/commands/flow.py
import argparse
from pathlib import Path

import numpy as np

from reconet.config import dump_key_values
from reconet.flow.flo import load_flo, save_flo
from reconet.flow.occlusion import occlusion_mask
from reconet.flow.transforms import downscale_flow
from reconet.models.flow import OcclusionMask
from reconet.schemas.command import CommandSpec
from reconet.utils.imageio import read_mask, write_mask

from .common import EXIT_OK, guarded


def run_info(args: argparse.Namespace, spec: CommandSpec) -> int:
    flow = load_flo(args.file)
    magnitude = np.linalg.norm(flow.vectors.astype(np.float64), axis=2)
    info = {
        "size": f"{flow.width}x{flow.height}",
        "min_magnitude": f"{magnitude.min():.6f}",
        "max_magnitude": f"{magnitude.max():.6f}",
    }
    (spec.out_dir / "flow-info.txt").write_text(dump_key_values(info), encoding="utf-8")
    print(info["size"])
    print(f"magnitude min={info['min_magnitude']} max={info['max_magnitude']}")
    return EXIT_OK


def run_occlusion(args: argparse.Namespace, spec: CommandSpec) -> int:
    mask = occlusion_mask(load_flo(args.fwd), load_flo(args.bwd), motion_boundaries=args.motion_boundaries)
    path = spec.out_dir / args.name
    write_mask(path, mask)
    traceable = int(mask.values.sum())
    print(f"mask={path} traceable={traceable}/{mask.values.size}")
    return EXIT_OK


def run_downscale(args: argparse.Namespace, spec: CommandSpec) -> int:
    flow = load_flo(args.flow)
    mask = read_mask(args.mask) if args.mask else OcclusionMask.full(flow.height, flow.width)
    flow_ds, mask_ds = downscale_flow(flow, mask, args.factor)
    stem = Path(args.flow).stem
    save_flo(spec.out_dir / f"{stem}_ds{args.factor}.flo", flow_ds)
    write_mask(spec.out_dir / f"{stem}_ds{args.factor}_mask.png", mask_ds)
    print(f"{flow_ds.width}x{flow_ds.height}")
    return EXIT_OK


RUNNERS = {"info": run_info, "occlusion": run_occlusion, "downscale": run_downscale}


def cmd_flow(args: argparse.Namespace, spec: CommandSpec) -> int:
    spec.out_dir.mkdir(parents=True, exist_ok=True)
    return RUNNERS[args.kind](args, spec)


def register(subparsers) -> None:
    parser = subparsers.add_parser("flow", help="Inspect and prepare optical flow files")
    kinds = parser.add_subparsers(dest="kind", required=True)

    info = kinds.add_parser("info", help="Print size and magnitude range of a .flo file")
    info.add_argument("file")
    info.add_argument("--out", help="Output directory")

    occlusion = kinds.add_parser("occlusion", help="Mask from a forward/backward flow pair")
    occlusion.add_argument("--fwd", required=True, help="Forward flow t-1 -> t")
    occlusion.add_argument("--bwd", required=True, help="Backward flow t -> t-1")
    occlusion.add_argument("--motion-boundaries", action="store_true")
    occlusion.add_argument("--name", default="mask.png")
    occlusion.add_argument("--out", help="Output directory")

    downscale = kinds.add_parser("downscale", help="Average-pool a flow (and min-pool its mask)")
    downscale.add_argument("--flow", required=True)
    downscale.add_argument("--mask")
    downscale.add_argument("--factor", type=int, default=4)
    downscale.add_argument("--out", help="Output directory")

    for sub in (info, occlusion, downscale):
        sub.set_defaults(handler=guarded(cmd_flow))
