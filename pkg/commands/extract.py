"""
Sous-commande `extract` : raster -> CSV de descripteurs
"""

import argparse
import logging
from pathlib import Path

from commands.common import add_patch_size, run_config
from models.descriptors import ExtractionParams
from services.descriptor_store import descriptor_store
from services.features import extract_descriptors, load_raster

logger = logging.getLogger(__name__)


def register(subparsers, parent: argparse.ArgumentParser) -> None:
    parser = subparsers.add_parser("extract", parents=[parent], help="Extraire les descripteurs d'une image")
    parser.add_argument("--image", required=True, help="Image lisible par Pillow (convertie en niveaux de gris)")
    parser.add_argument("--out", required=True, help="CSV de descripteurs à écrire")
    parser.add_argument("--slide-id", help="Identifiant de la lame (défaut: nom du fichier)")
    parser.add_argument("--stride", dest="stride_px", type=int, help="Pas de la grille dense en pixels")
    parser.add_argument("--cell", dest="cell_px", type=int, help="Côté d'une cellule en pixels")
    add_patch_size(parser)
    parser.set_defaults(handler=run)


def run(args: argparse.Namespace) -> int:
    config = run_config(args, extra=("stride_px", "cell_px"))
    params = ExtractionParams(stride_px=config.stride_px, cell_px=config.cell_px, patch_size_px=config.patch_size_px)
    slide_id = args.slide_id or Path(args.image).stem

    image = load_raster(args.image)
    slide = extract_descriptors(image, params, slide_id=slide_id)
    descriptor_store.write_descriptors(slide, args.out)
    logger.info(f"✅ {len(slide)} descripteurs extraits vers {args.out}")
    return 0
