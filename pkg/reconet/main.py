# reconet/main.py
import sys
from typing import List, Optional

from reconet import __version__
from reconet.commands import COMMANDS
from reconet.commands.common import CommandParser
from reconet.config import get_settings
from reconet.utils.log import configure_logging

settings = get_settings()


def build_parser() -> CommandParser:
    parser = CommandParser(prog="reconet", description="Real-time coherent video style transfer")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    subparsers = parser.add_subparsers(dest="command", required=True)
    for command in COMMANDS:
        command.register(subparsers)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    configure_logging(settings.LOG_LEVEL)
    args = build_parser().parse_args(argv)
    return args.handler(args)


if __name__ == "__main__":
    sys.exit(main())
