# reconet/commands/bench.py
import argparse

from reconet.config import dump_key_values
from reconet.evaluation.benchmark import fps_benchmark, halving_sanity
from reconet.schemas.command import CommandSpec
from reconet.stylenet.checkpoint import load_checkpoint_file

from .common import EXIT_INPUT, EXIT_OK, guarded, parse_resolution


def cmd_bench(args: argparse.Namespace, spec: CommandSpec) -> int:
    model, _ = load_checkpoint_file(args.checkpoint)
    report = fps_benchmark(model, args.resolution, warmup_iters=args.warmup, timed_iters=args.iters)
    values = report.to_key_values()
    spec.out_dir.mkdir(parents=True, exist_ok=True)
    (spec.out_dir / "bench.txt").write_text(dump_key_values(values), encoding="utf-8")
    print(dump_key_values(values), end="")
    if args.sanity and not halving_sanity(model, args.resolution, timed_iters=args.iters):
        return EXIT_INPUT
    return EXIT_OK


def register(subparsers) -> None:
    parser = subparsers.add_parser("bench", help="Per-frame inference latency")
    parser.add_argument("--checkpoint", required=True)
    parser.add_argument("--resolution", type=parse_resolution, default=(640, 360))
    parser.add_argument("--iters", type=int, default=10)
    parser.add_argument("--warmup", type=int, default=3)
    parser.add_argument("--sanity", action="store_true", help="Also check that half resolution runs faster")
    parser.add_argument("--out", help="Output directory")
    parser.set_defaults(handler=guarded(cmd_bench))
