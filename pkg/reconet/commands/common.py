# reconet/commands/common.py
import argparse
import functools
import json
import logging
import sys
from pathlib import Path
from typing import Callable, Dict, Optional, Tuple

from pydantic import ValidationError

from reconet.config import dump_key_values, get_settings
from reconet.schemas.command import CommandSpec
from reconet.utils.errors import NumericError, ReconetError, create_error_response

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_NUMERIC = 2

MANIFEST_NAME = "run-manifest.txt"

Handler = Callable[[argparse.Namespace, CommandSpec], int]


class CommandParser(argparse.ArgumentParser):
    """argparse with usage errors mapped to exit code 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INPUT, f"{self.prog}: error: {message}\n")


def parse_resolution(value: str) -> Tuple[int, int]:
    try:
        width, height = (int(part) for part in value.lower().split("x"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected WIDTHxHEIGHT, got '{value}'")
    if width <= 0 or height <= 0:
        raise argparse.ArgumentTypeError(f"resolution must be positive, got '{value}'")
    return width, height


def command_flags(args: argparse.Namespace) -> Dict[str, str]:
    flags = {}
    for key, value in vars(args).items():
        if key in ("handler", "command") or value is None:
            continue
        if isinstance(value, (list, tuple)) and not isinstance(value, str):
            value = ",".join(str(v) for v in value)
        flags[key] = str(value)
    return flags


def out_dir_of(args: argparse.Namespace) -> Path:
    out = getattr(args, "out", None)
    return Path(out) if out else Path(get_settings().OUTPUT_DIR) / args.command


def write_manifest(spec: CommandSpec, resolved: Optional[Dict[str, str]] = None) -> Path:
    spec.out_dir.mkdir(parents=True, exist_ok=True)
    path = spec.out_dir / MANIFEST_NAME
    path.write_text(dump_key_values(spec.manifest_values(resolved)), encoding="utf-8")
    return path


def report_error(error: Exception) -> None:
    if isinstance(error, ReconetError):
        payload = error.to_dict()
    else:
        payload = create_error_response(message="Invalid input", details=str(error))
    print(json.dumps(payload), file=sys.stderr)


def guarded(handler: Handler) -> Callable[[argparse.Namespace], int]:
    """Write the run manifest, run the handler and map errors onto exit codes."""

    @functools.wraps(handler)
    def run(args: argparse.Namespace) -> int:
        spec = CommandSpec(
            name=args.command,
            flags=command_flags(args),
            config_path=getattr(args, "config", None),
            out_dir=out_dir_of(args),
        )
        write_manifest(spec)
        try:
            return handler(args, spec)
        except NumericError as e:
            logger.error(f"{args.command} failed: {e}")
            report_error(e)
            return EXIT_NUMERIC
        except (ReconetError, ValidationError, OSError) as e:
            logger.error(f"{args.command} failed: {e}")
            report_error(e)
            return EXIT_INPUT

    return run
