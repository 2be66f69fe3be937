"""
Options partagées par les sous-commandes et construction de la configuration effective
"""

import argparse
from typing import Any, Dict, Iterable

from core.config import RunConfig, load_run_config
from models.evidence import ModelParams
from models.training import ScheduleConfig

# Option de ligne de commande -> champ de RunConfig
MODEL_FLAGS = {
    "threshold": "match_threshold",
    "min_occurrences": "min_occurrences",
    "acceptance_ratio": "acceptance_ratio",
    "skip_threshold": "patch_skip_threshold",
    "patch_size": "patch_size_px",
}


def common_options() -> argparse.ArgumentParser:
    """Parent de chaque sous-commande : configuration, parallélisme, journalisation"""
    parent = argparse.ArgumentParser(add_help=False)
    parent.add_argument("--config", help="Fichier de configuration JSON (clés de RunConfig)")
    parent.add_argument("--threads", type=int, help="Nombre de threads (0 = automatique)")
    parent.add_argument("--log-base", choices=["e", "2"], help="Base du logarithme des mesures d'information")
    parent.add_argument("-v", "--verbose", action="store_true", help="Journalisation DEBUG")
    return parent


def add_patch_size(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--patch-size", type=int, help="Côté des patchs en pixels (défaut 512)")


def add_model_options(parser: argparse.ArgumentParser) -> None:
    group = parser.add_argument_group("paramètres du modèle")
    group.add_argument("--threshold", type=float, help="Seuil de distance d'appariement (défaut 325)")
    group.add_argument("--min-occurrences", type=int, help="Occurrences minimales d'un leader (défaut 10)")
    group.add_argument("--acceptance-ratio", type=float, help="Rapport d'acceptation (défaut 2)")
    group.add_argument("--skip-threshold", type=int, help="Descripteurs minimum pour évaluer un patch (défaut 3000)")
    add_patch_size(group)


def run_config(args: argparse.Namespace, extra: Iterable[str] = ()) -> RunConfig:
    """Settings < fichier --config < options ; `extra` liste des attributs homonymes de RunConfig"""
    overrides: Dict[str, Any] = {
        "threads": getattr(args, "threads", None),
        "log_base": getattr(args, "log_base", None),
    }
    for flag, field in MODEL_FLAGS.items():
        overrides[field] = getattr(args, flag, None)
    for name in extra:
        overrides[name] = getattr(args, name, None)
    return load_run_config(getattr(args, "config", None), overrides)


def model_params(config: RunConfig) -> ModelParams:
    return ModelParams(
        match_threshold=config.match_threshold,
        min_occurrences=config.min_occurrences,
        acceptance_ratio=config.acceptance_ratio,
        patch_skip_threshold=config.patch_skip_threshold,
        patch_size_px=config.patch_size_px,
    )


def schedule_config(config: RunConfig) -> ScheduleConfig:
    return ScheduleConfig.parse(config.schedule, config.budget_per_class, config.per_round_k)


def provenance(config: RunConfig, command: str) -> Dict[str, Any]:
    return {"command": command, "config": config.provenance()}
