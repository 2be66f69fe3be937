"""
Sous-commande `train` : apprentissage rapide sur une lame étiquetée
"""

import argparse

from commands.common import add_model_options, model_params, provenance, run_config, schedule_config
from services.descriptor_store import descriptor_store
from services.learner import Trainer
from services.model_store import model_store


def register(subparsers, parent: argparse.ArgumentParser) -> None:
    parser = subparsers.add_parser("train", parents=[parent], help="Apprendre un modèle d'évidence")
    parser.add_argument("--slide", required=True, help="CSV de descripteurs de la lame d'apprentissage")
    parser.add_argument("--labels", required=True, help="CSV d'étiquettes X,Y,label")
    parser.add_argument("--out", required=True, help="Fichier modèle JSON")
    parser.add_argument("--state-out", help="État d'apprentissage JSON (utilisé par `remedy`)")
    parser.add_argument("--schedule", help="Programme, ex. high_density-worst-deterioration*3,worst*")
    parser.add_argument("--budget", dest="budget_per_class", type=int, help="Patchs par classe (défaut 20)")
    parser.add_argument("--per-round", dest="per_round_k", type=int, help="Patchs par classe et par round (défaut 2)")
    add_model_options(parser)
    parser.set_defaults(handler=run)


def run(args: argparse.Namespace) -> int:
    config = run_config(args, extra=("schedule", "budget_per_class", "per_round_k"))
    slide = descriptor_store.ingest_descriptors(args.slide, patch_size_px=config.patch_size_px)
    labels = descriptor_store.load_labels(args.labels)

    record = provenance(config, "train")
    trainer = Trainer(
        model_params(config), schedule_config(config),
        log_base=config.log_base, threads=config.threads, provenance=record,
    )
    model, state = trainer.train(slide, labels)

    model_store.save_model(model, args.out)
    if args.state_out:
        model_store.save_state(state, args.state_out, provenance=record)
    return 0
