"""
Sous-commande `score` : carte C_KL d'une lame et carte de chaleur
"""

import argparse

from commands.common import run_config
from services.descriptor_store import descriptor_store
from services.heatmap import render_heatmap
from services.model_store import model_store
from services.reports import report_store
from services.scoring import score_slide


def register(subparsers, parent: argparse.ArgumentParser) -> None:
    parser = subparsers.add_parser("score", parents=[parent], help="Calculer la carte de scores d'une lame")
    parser.add_argument("--model", required=True, help="Fichier modèle JSON")
    parser.add_argument("--slide", required=True, help="CSV de descripteurs")
    parser.add_argument("--out", required=True, help="CSV de la carte de scores")
    parser.add_argument("--heatmap", help="Carte de chaleur PPM (P6)")
    parser.add_argument("--block-px", dest="heatmap_block_px", type=int, help="Pixels par patch dans la carte")
    parser.set_defaults(handler=run)


def run(args: argparse.Namespace) -> int:
    config = run_config(args, extra=("heatmap_block_px",))
    model = model_store.load_model(args.model)
    # La grille suit la taille de patch du modèle
    slide = descriptor_store.ingest_descriptors(args.slide, patch_size_px=model.params.patch_size_px)

    score_map = score_slide(model, slide, threads=config.threads)
    report_store.write_scores(score_map, args.out)
    if args.heatmap:
        render_heatmap(score_map, args.heatmap, block_px=config.heatmap_block_px)
    return 0
