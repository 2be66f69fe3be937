"""
Service de persistance JSON du modèle d'évidence et de l'état d'apprentissage
"""

import json
import logging
from pathlib import Path
from typing import Any, Dict, Union

from pydantic import ValidationError

from core.exceptions import FormatError
from models.evidence import FORMAT_VERSION, EvidenceFeature, EvidenceModel, ModelParams, Polarity
from models.training import TrainState
from services.descriptor_store import open_text

logger = logging.getLogger(__name__)

Target = Union[str, Path]

# Nom des clés de `params` dans le fichier -> champs de ModelParams
PARAM_KEYS = {
    "threshold": "match_threshold",
    "min_occurrences": "min_occurrences",
    "acceptance_ratio": "acceptance_ratio",
    "patch_skip_threshold": "patch_skip_threshold",
    "patch_size_px": "patch_size_px",
}


def _feature_document(feature: EvidenceFeature) -> Dict[str, Any]:
    return {
        "polarity": feature.polarity.value,
        "rho_p": feature.rho_p,
        "cic": feature.cic,
        "count_p": feature.count_p,
        "count_n": feature.count_n,
        "leader": [int(v) if float(v).is_integer() else float(v) for v in feature.leader],
    }


def model_document(model: EvidenceModel) -> Dict[str, Any]:
    return {
        "format_version": FORMAT_VERSION,
        "log_base": model.log_base,
        "params": {key: getattr(model.params, field) for key, field in PARAM_KEYS.items()},
        "alpha": model.alpha,
        "n_p": model.n_p,
        "n_n": model.n_n,
        "features": [_feature_document(f) for f in model.features],
        "provenance": model.provenance,
    }


def model_from_document(document: Dict[str, Any]) -> EvidenceModel:
    """
    Reconstruit le modèle et vérifie sa cohérence interne

    Raises:
        FormatError: version inconnue, champ manquant ou invariant violé
    """
    if not isinstance(document, dict):
        raise FormatError("le modèle doit être un objet JSON")
    version = document.get("format_version")
    if version != FORMAT_VERSION:
        raise FormatError(f"format_version {version!r} non supporté (attendu {FORMAT_VERSION})")
    try:
        raw_params = document["params"]
        unknown = set(raw_params) - set(PARAM_KEYS)
        if unknown:
            raise FormatError(f"paramètres inconnus: {sorted(unknown)}")
        params = ModelParams(**{PARAM_KEYS[key]: value for key, value in raw_params.items()})
        features = [EvidenceFeature(**f) for f in document["features"]]
        model = EvidenceModel(
            positives=[f for f in features if f.polarity == Polarity.positive],
            negatives=[f for f in features if f.polarity == Polarity.negative],
            alpha=document["alpha"],
            params=params,
            log_base=document["log_base"],
            provenance=document.get("provenance", {}),
        )
    except KeyError as e:
        raise FormatError(f"champ manquant dans le modèle: {e}") from e
    except (TypeError, ValidationError) as e:
        raise FormatError(f"modèle invalide: {e}") from e

    if features != model.features:
        raise FormatError("les caractéristiques positives doivent précéder les négatives")
    if (document.get("n_p"), document.get("n_n")) != (model.n_p, model.n_n):
        raise FormatError("n_p / n_n incohérents avec la liste des caractéristiques")
    return model


def _load_json(source: Target) -> Any:
    with open_text(source, "r") as stream:
        try:
            return json.load(stream)
        except json.JSONDecodeError as e:
            raise FormatError(f"JSON illisible dans {source}: {e}") from e


def _dump_json(document: Any, target: Target) -> None:
    with open_text(target, "w") as stream:
        stream.write(json.dumps(document, indent=2, ensure_ascii=False))
        stream.write("\n")


class ModelStore:
    def save_model(self, model: EvidenceModel, target: Target) -> None:
        _dump_json(model_document(model), target)
        logger.info(f"💾 Modèle écrit: {target} (n_p={model.n_p}, n_n={model.n_n})")

    def load_model(self, source: Target) -> EvidenceModel:
        model = model_from_document(_load_json(source))
        logger.info(f"📂 Modèle chargé: {source} ({model.n_features} caractéristiques, base {model.log_base})")
        return model

    def save_state(self, state: TrainState, target: Target, provenance: Dict[str, Any] = None) -> None:
        """Les cartes de scores par round restent en mémoire et ne sont pas écrites"""
        document = state.model_dump(mode="json")
        if provenance:
            document["provenance"] = provenance
        _dump_json(document, target)
        logger.info(f"💾 État d'apprentissage écrit: {target} ({len(state.rounds)} rounds)")

    def load_state(self, source: Target) -> TrainState:
        document = _load_json(source)
        if isinstance(document, dict):
            document.pop("provenance", None)
        try:
            return TrainState.model_validate(document)
        except ValidationError as e:
            raise FormatError(f"état d'apprentissage invalide: {e}") from e


model_store = ModelStore()
