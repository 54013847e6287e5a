# reconet/commands/train.py
import argparse
import logging

from reconet.config import load_train_config
from reconet.schemas.command import CommandSpec
from reconet.training.trainer import train

from .common import EXIT_OK, guarded, write_manifest

logger = logging.getLogger(__name__)


def cmd_train(args: argparse.Namespace, spec: CommandSpec) -> int:
    overrides = list(args.set or [])
    if args.steps is not None:
        overrides.append(f"steps={args.steps}")
    if args.seed is not None:
        overrides.append(f"seed={args.seed}")
    if args.resume is not None:
        overrides.append(f"resume={args.resume}")
    overrides.append(f"out_dir={spec.out_dir}")

    config = load_train_config(args.config, overrides)
    write_manifest(spec, config.to_key_values())
    result = train(config, progress=not args.no_progress)
    print(f"checkpoint={result.checkpoint}")
    print(f"loss_log={result.loss_log}")
    return EXIT_OK


def register(subparsers) -> None:
    parser = subparsers.add_parser("train", help="Train a stylization network")
    parser.add_argument("--config", help="key=value config file")
    parser.add_argument("--set", action="append", metavar="KEY=VALUE", help="Override one config key")
    parser.add_argument("--steps", type=int)
    parser.add_argument("--seed", type=int)
    parser.add_argument("--resume", help="Checkpoint to continue from")
    parser.add_argument("--out", help="Output directory")
    parser.add_argument("--no-progress", action="store_true", help="Disable the progress bar")
    parser.set_defaults(handler=guarded(cmd_train))
