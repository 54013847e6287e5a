# reconet/commands/fixture.py
import argparse

from reconet.fixtures import write_fixture_dataset
from reconet.schemas.command import CommandSpec

from .common import EXIT_OK, guarded, parse_resolution


def cmd_fixture(args: argparse.Namespace, spec: CommandSpec) -> int:
    root = write_fixture_dataset(spec.out_dir, scenes=args.scenes, frames=args.frames, size=args.size, seed=args.seed)
    print(f"dataset={root}")
    return EXIT_OK


def register(subparsers) -> None:
    parser = subparsers.add_parser("fixture", help="Write a synthetic translating-texture dataset")
    parser.add_argument("--scenes", type=int, default=1)
    parser.add_argument("--frames", type=int, default=10)
    parser.add_argument("--size", type=parse_resolution, default=(64, 64))
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--out", help="Dataset directory")
    parser.set_defaults(handler=guarded(cmd_fixture))
