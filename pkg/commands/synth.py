"""
Sous-commande `synth` : lame synthétique et ses étiquettes
"""

import argparse
import json
import logging

from pydantic import ValidationError

from commands.common import run_config
from core.exceptions import FormatError, SpecError
from models.evaluation import SyntheticSpec
from services.descriptor_store import descriptor_store, open_text
from services.synthetic import synth_slide

logger = logging.getLogger(__name__)


def register(subparsers, parent: argparse.ArgumentParser) -> None:
    parser = subparsers.add_parser("synth", parents=[parent], help="Générer une lame synthétique")
    parser.add_argument("--spec", help="SyntheticSpec en JSON (défauts sinon)")
    parser.add_argument("--seed", type=int, help="Graine des descripteurs (remplace celle du spec)")
    parser.add_argument("--center-seed", type=int, help="Graine des centres de grappes")
    parser.add_argument("--slide-id", help="Identifiant de la lame")
    parser.add_argument("--out", required=True, help="CSV de descripteurs à écrire")
    parser.add_argument("--labels-out", required=True, help="CSV d'étiquettes à écrire")
    parser.set_defaults(handler=run)


def load_spec(path: str) -> SyntheticSpec:
    with open_text(path, "r") as stream:
        try:
            document = json.load(stream)
        except json.JSONDecodeError as e:
            raise FormatError(f"JSON illisible dans {path}: {e}") from e
    try:
        return SyntheticSpec.model_validate(document)
    except ValidationError as e:
        raise SpecError(f"SyntheticSpec invalide: {e.errors()[0]['loc']} {e.errors()[0]['msg']}") from e


def run(args: argparse.Namespace) -> int:
    config = run_config(args)
    spec = load_spec(args.spec) if args.spec else SyntheticSpec(seed=config.seed)
    updates = {"seed": args.seed, "center_seed": args.center_seed, "slide_id": args.slide_id}
    spec = spec.model_copy(update={k: v for k, v in updates.items() if v is not None})

    slide, labels = synth_slide(spec)
    descriptor_store.write_descriptors(slide, args.out)
    descriptor_store.write_labels(labels, args.labels_out)
    logger.info(f"✅ Lame {spec.slide_id} écrite: {args.out}, étiquettes: {args.labels_out}")
    return 0
