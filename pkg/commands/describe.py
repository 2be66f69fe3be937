"""
Sous-commande `describe` : table des caractéristiques d'évidence
"""

import argparse

from commands.common import run_config
from services.model_store import model_store
from services.reports import report_store


def register(subparsers, parent: argparse.ArgumentParser) -> None:
    parser = subparsers.add_parser("describe", parents=[parent], help="Lister les caractéristiques d'un modèle")
    parser.add_argument("--model", required=True, help="Fichier modèle JSON")
    parser.add_argument("--out", required=True, help="CSV rank,polarity,rho_p,cic,kl,count_p,count_n")
    parser.add_argument("--by", choices=["cic", "kl"], default="cic", help="Tri par |C_KL| ou par D_KL")
    parser.set_defaults(handler=run)


def run(args: argparse.Namespace) -> int:
    run_config(args)
    report_store.write_features(model_store.load_model(args.model), args.out, by=args.by)
    return 0
