#!/usr/bin/env python3
"""
Secure Consensus Lab - Command Line Entry

Usage:
    python -m app.secure_consensus synth   --config F --out gains.json
    python -m app.secure_consensus verify  --config F --gains G
    python -m app.secure_consensus run     --config F --gains G [--seed N] --out DIR
    python -m app.secure_consensus compare --config F --gains G --seeds 1,2,3
    python -m app.secure_consensus demo    [--out DIR]
    python -m app.secure_consensus sweep   --config F [--gains G] --taus 0.01,0.02 --seeds 0-19
    python -m app.secure_consensus init    --out scenario.json [--literal-table]

Author: ThinkCraft
"""

from typing import List, Optional
import argparse
import logging
import sys

from .cli import EXIT_IO, cmd_compare, cmd_demo, cmd_init, cmd_run, cmd_sweep, cmd_synth, cmd_verify
from .core.config import settings

logging.basicConfig(
    level=getattr(logging, settings.LOG_LEVEL, logging.INFO),
    format='%(asctime)s - %(name)s - %(levelname)s - %(message)s'
)
logger = logging.getLogger(__name__)


def _ablation_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--xi-hold-mode", choices=["refresh", "freeze"], default=None,
                        help="Override trigger.xi_hold_mode")
    parser.add_argument("--rebroadcast-on-switch", action="store_true",
                        help="Force every agent to broadcast after a topology switch")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="secure-consensus", description=f"{settings.APP_NAME} {settings.APP_VERSION}")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("synth", help="Synthesize controller and observer gains.")
    s.add_argument("--config", required=True)
    s.add_argument("--out", default="gains.json")
    s.set_defaults(handler=cmd_synth)

    v = sub.add_parser("verify", help="Check every design condition for a gains file.")
    v.add_argument("--config", required=True)
    v.add_argument("--gains", required=True)
    v.set_defaults(handler=cmd_verify)

    r = sub.add_parser("run", help="Simulate the proposed protocol once.")
    r.add_argument("--config", required=True)
    r.add_argument("--gains", required=True)
    r.add_argument("--seed", type=int, default=None, help="Overrides ETC_SEED and the document seed")
    r.add_argument("--out", required=True)
    _ablation_flags(r)
    r.set_defaults(handler=cmd_run)

    c = sub.add_parser("compare", help="Paired-seed comparison against the baseline protocol.")
    c.add_argument("--config", required=True)
    c.add_argument("--gains", required=True)
    c.add_argument("--seeds", required=True, help="Comma list, ranges like 0-9 allowed")
    c.add_argument("--out", default=None, help="Optional JSON summary path")
    _ablation_flags(c)
    c.set_defaults(handler=cmd_compare)

    d = sub.add_parser("demo", help="Full ten-spacecraft replication bundle.")
    d.add_argument("--out", default=None, help=f"Output directory (default {settings.OUTPUT_DIR})")
    d.add_argument("--config", default=None, help="Use this document instead of the embedded scenario")
    d.set_defaults(handler=cmd_demo)

    w = sub.add_parser("sweep", help="Tail consensus error against the bound for several tau.")
    w.add_argument("--config", required=True)
    w.add_argument("--gains", default=None)
    w.add_argument("--taus", required=True)
    w.add_argument("--seeds", default="0-19")
    w.add_argument("--out", default=None, help="Optional CSV path")
    w.set_defaults(handler=cmd_sweep)

    i = sub.add_parser("init", help="Write the embedded scenario document.")
    i.add_argument("--out", required=True)
    i.add_argument("--literal-table", action="store_true",
                   help="Use the reference parameter table verbatim")
    i.set_defaults(handler=cmd_init)
    return p


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_IO if exc.code else 0
    logger.debug(f"Dispatching {args.command}")
    return args.handler(args)


if __name__ == "__main__":
    sys.exit(main())
