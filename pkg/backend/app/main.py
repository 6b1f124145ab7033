# main.py
"""
welfare-order command line.

    python -m app.main simulate --config run.json --out results/ --threads 8

Exit codes: 0 success, 2 config error, 3 budget exceeded, 4 runtime error.
"""
import argparse
import sys
from pathlib import Path
from typing import List, Optional

from app.api.commands import COMMANDS
from app.core.config import get_settings
from app.core.exceptions import ConfigError, handle_exception
from app.core.logging import logger
from app.core.serialization import dumps_canonical
from app.models.config import load_config


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="welfare-order", description="Welfare of weighted two-tier voting.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        cmd = sub.add_parser(name)
        cmd.add_argument("--config", required=True, type=Path, help="run configuration (JSON)")
        cmd.add_argument("--out", default=Path("out"), type=Path, help="output directory")
        cmd.add_argument("--threads", type=int, default=None, help="worker threads; affects speed only")
        cmd.add_argument("--samples", type=int, default=None, help="override config samples")
        cmd.add_argument("--seed", type=int, default=None, help="override config seed")
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    context = {"event": "command", "command": args.command}
    try:
        threads = args.threads if args.threads is not None else get_settings().threads
        if threads < 1:
            raise ConfigError(f"--threads must be at least 1, got {threads}")
        cfg = load_config(args.config, overrides={"samples": args.samples, "seed": args.seed})
        logger.info("Command started", extra={**context, "status": "started", "threads": threads})
        report = COMMANDS[args.command](cfg, args.out, threads)
        sys.stdout.write(dumps_canonical(report))
        logger.info("Command completed", extra={**context, "status": "success"})
        return 0
    except Exception as e:
        return handle_exception(e)


if __name__ == "__main__":
    sys.exit(main())
