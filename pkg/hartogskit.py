#!/usr/bin/env python3
"""
Hartogs Kit - Entry point script.

    hartogskit.py <subcommand> --config <path> --out <dir> [--threads N] [--verbose]

Subcommands: extend, dbar, cousin, normalize, continue, loopspace.
"""

import argparse
import logging
import os
import sys
from pathlib import Path

# Add src to Python path
sys.path.insert(0, str(Path(__file__).parent / 'src'))

from hartogs_kit.config import SUBCOMMANDS, load_config
from hartogs_kit.errors import ConfigError
from hartogs_kit.runner import run


def setup_logging(verbose: bool = False):
    """Configure logging output"""
    level = os.getenv('HARTOGSKIT_LOG_LEVEL', 'DEBUG' if verbose else 'INFO').upper()
    logging.basicConfig(
        level=getattr(logging, level, logging.INFO),
        format='%(message)s'
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog='hartogskit', description=__doc__.strip().splitlines()[0])
    parser.add_argument('subcommand', choices=SUBCOMMANDS)
    parser.add_argument('--config', help='key = value config file')
    parser.add_argument('--out', help='output directory')
    parser.add_argument('--fixture', help='fixture id (overrides the config)')
    parser.add_argument('--threads', type=int, help='cap on inner parallelism')
    parser.add_argument('--verbose', action='store_true', help='debug logging')
    return parser


def main(argv=None) -> int:
    """Main run workflow"""
    args = build_parser().parse_args(argv)
    setup_logging(args.verbose)
    logger = logging.getLogger(__name__)

    logger.info("=" * 60)
    logger.info(f"🧮 Hartogs Kit: {args.subcommand}")
    logger.info("=" * 60)

    overrides = {'subcommand': args.subcommand, 'fixture': args.fixture,
                 'out_dir': args.out, 'threads': args.threads}
    if args.verbose:
        overrides['log_level'] = 'DEBUG'
    try:
        config = load_config(args.config, overrides)
    except ConfigError as e:
        reason = ' '.join(str(e).split())
        print(f"ERROR {e.code}: {reason}", file=sys.stderr)
        logger.error(f"❌ Bad configuration: {reason}")
        return e.exit_code

    logging.getLogger().setLevel(config.log_level.upper())
    logger.info(f"📂 Output: {config.out_dir}")
    logger.info(f"🧵 Threads: {config.threads}")
    logger.info("")

    exit_code = run(config)

    logger.info("")
    logger.info("=" * 60)
    logger.info("✅ Run complete!" if exit_code == 0 else f"❌ Run failed (exit code {exit_code})")
    logger.info("=" * 60)
    return exit_code


if __name__ == '__main__':
    sys.exit(main())
