#!/usr/bin/env python3
"""
cicmap : cartes d'information de classification (C_KL) par patch de lame

Usage:
    python main.py {extract,ingest,synth,train,score,eval,remedy,describe} [options]

Les données sont écrites dans des fichiers ; les diagnostics vont sur stderr.
Codes de sortie : 0 succès, 1 erreur de validation, 2 erreur d'entrée/sortie.
"""

import argparse
import logging
import sys
from typing import List, Optional

from commands import COMMANDS
from commands.common import common_options
from core.config import settings
from core.exceptions import CicmapError

logger = logging.getLogger(__name__)


class CliParser(argparse.ArgumentParser):
    """Erreur d'usage : texte d'aide sur stderr et code 1"""

    def error(self, message: str):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: erreur: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = CliParser(prog="cicmap", description="Contenu d'information de classification par patch")
    subparsers = parser.add_subparsers(dest="command", metavar="COMMANDE")
    subparsers.required = True
    parent = common_options()
    for command in COMMANDS:
        command.register(subparsers, parent)
    return parser


def configure_logging(verbose: bool) -> None:
    level = logging.DEBUG if verbose else getattr(logging, settings.log_level.upper(), logging.INFO)
    logging.basicConfig(
        stream=sys.stderr,
        level=level,
        format='%(asctime)s - %(levelname)s - %(message)s'
    )
    logging.getLogger().setLevel(level)


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)

    configure_logging(args.verbose)
    try:
        return args.handler(args)
    except CicmapError as e:
        logger.error(f"❌ {e.detail}")
        return e.exit_code
    except OSError as e:
        logger.error(f"❌ Erreur d'entrée/sortie: {e}")
        return 2


if __name__ == "__main__":
    sys.exit(main())
