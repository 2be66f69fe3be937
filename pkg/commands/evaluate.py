"""
Sous-commande `eval` : ROC/AUC et histogrammes d'une carte de scores
"""

import argparse

from commands.common import run_config
from core.exceptions import InvalidArgumentError
from services.descriptor_store import descriptor_store
from services.evaluation import histogram, roc_auc
from services.reports import report_store


def register(subparsers, parent: argparse.ArgumentParser) -> None:
    parser = subparsers.add_parser("eval", parents=[parent], help="Évaluer une carte de scores")
    parser.add_argument("--scores", required=True, help="CSV de la carte de scores")
    parser.add_argument("--labels", required=True, help="CSV d'étiquettes X,Y,label")
    parser.add_argument("--roc", help="CSV de la courbe ROC (threshold,fpr,tpr + ligne auc)")
    parser.add_argument("--histogram", help="CSV de l'histogramme (bin_lo,bin_hi,cancer,normal)")
    parser.add_argument("--bin-width", type=float, help="Largeur des classes (défaut (max-min)/50)")
    parser.set_defaults(handler=run)


def run(args: argparse.Namespace) -> int:
    run_config(args)
    if not args.roc and not args.histogram:
        raise InvalidArgumentError("au moins une sortie parmi --roc et --histogram")
    score_map = report_store.load_scores(args.scores)
    labels = descriptor_store.load_labels(args.labels)

    if args.histogram:
        report_store.write_histogram(histogram(score_map, labels, args.bin_width), args.histogram)
    if args.roc:
        report_store.write_roc(roc_auc(score_map, labels), args.roc)
    return 0
