"""
Sous-commande `remedy` : round no_information sur une lame à décalage de covariables
"""

import argparse

from commands.common import provenance, run_config, schedule_config
from core.exceptions import InvalidArgumentError
from services.descriptor_store import descriptor_store
from services.learner import Trainer
from services.model_store import model_store


def register(subparsers, parent: argparse.ArgumentParser) -> None:
    parser = subparsers.add_parser("remedy", parents=[parent], help="Corriger un décalage de covariables")
    parser.add_argument("--model", required=True, help="Modèle JSON courant")
    parser.add_argument("--state", required=True, help="État d'apprentissage JSON (train --state-out)")
    parser.add_argument("--slides", nargs="+", default=[], help="CSV des lames déjà utilisées")
    parser.add_argument("--target", required=True, help="CSV de la lame cible")
    parser.add_argument("--target-labels", required=True, help="Étiquettes de la lame cible")
    parser.add_argument("--k", type=int, help="Patchs ajoutés par classe (défaut: per_round_k de l'état)")
    parser.add_argument("--out", required=True, help="Modèle JSON réajusté")
    parser.add_argument("--state-out", help="État d'apprentissage mis à jour")
    parser.set_defaults(handler=run)


def run(args: argparse.Namespace) -> int:
    config = run_config(args)
    model = model_store.load_model(args.model)
    state = model_store.load_state(args.state)
    patch_size = model.params.patch_size_px

    slides = {}
    for path in args.slides:
        slide = descriptor_store.ingest_descriptors(path, patch_size_px=patch_size)
        slides[slide.slide_id] = slide
    target = descriptor_store.ingest_descriptors(args.target, patch_size_px=patch_size)
    target_labels = descriptor_store.load_labels(args.target_labels)

    missing = {ref.slide_id for ref in state.selected()} - set(slides) - {target.slide_id}
    if missing:
        raise InvalidArgumentError(f"lames de l'état absentes de --slides: {sorted(missing)}")

    record = provenance(config, "remedy")
    trainer = Trainer(
        model.params, schedule_config(config),
        log_base=model.log_base, threads=config.threads, provenance=record,
    )
    refitted, state = trainer.remedy_covariate_shift(model, state, slides, target, target_labels, k=args.k)

    model_store.save_model(refitted, args.out)
    if args.state_out:
        model_store.save_state(state, args.state_out, provenance=record)
    return 0
