"""
Sous-commande `ingest` : validation et réécriture canonique d'un CSV de descripteurs
"""

import argparse
import logging

from commands.common import add_patch_size, run_config
from services.descriptor_store import descriptor_store

logger = logging.getLogger(__name__)


def register(subparsers, parent: argparse.ArgumentParser) -> None:
    parser = subparsers.add_parser("ingest", parents=[parent], help="Valider et regrouper un CSV de descripteurs")
    parser.add_argument("--slide", required=True, help="CSV de descripteurs en entrée")
    parser.add_argument("--out", required=True, help="CSV canonique (ordre raster des patchs)")
    parser.add_argument("--width", type=int, help="Largeur de la lame en pixels")
    parser.add_argument("--height", type=int, help="Hauteur de la lame en pixels")
    add_patch_size(parser)
    parser.set_defaults(handler=run)


def run(args: argparse.Namespace) -> int:
    config = run_config(args)
    slide = descriptor_store.ingest_descriptors(
        args.slide, patch_size_px=config.patch_size_px, width_px=args.width, height_px=args.height,
    )
    descriptor_store.write_descriptors(slide, args.out)

    counts = slide.patch_counts()
    active = sum(1 for n in counts.values() if n >= config.patch_skip_threshold)
    logger.info(
        f"✅ {slide.slide_id}: {len(slide)} descripteurs, {len(counts)} patchs, "
        f"{active} au-dessus du seuil {config.patch_skip_threshold}"
    )
    return 0
