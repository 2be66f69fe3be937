"""
Distribution spatiale de l'information de classification sur la grille de patchs
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from typing import List, Optional

import numpy as np

from core.exceptions import ConfigurationError, ModelError
from models.descriptors import DESCRIPTOR_SIZE, SlideDescriptorSet
from models.evidence import EvidenceModel
from models.scores import Classification, PatchScore, ScoreCell, ScoreMap
from services.evidence import assign_to_codebook, resolve_threads

logger = logging.getLogger(__name__)


def score_patch(model: EvidenceModel, patch_records: np.ndarray) -> PatchScore:
    """
    C_KL(X, Y | I) = (1 - alpha) sum_i C(f^p_i) N(f^p_i) + alpha sum_j C(f^n_j) N(f^n_j)

    N est obtenu par affectation au plus proche leader du dictionnaire
    combiné : un descripteur ne compte jamais à la fois pour les deux côtés.
    """
    if model.n_features == 0:
        raise ModelError("modèle vide: aucune caractéristique d'évidence")

    leaders, cic = model.union_codebook
    records = np.asarray(patch_records).reshape(-1, DESCRIPTOR_SIZE)
    assignment = assign_to_codebook(records, leaders, model.params.match_threshold)
    counts = np.bincount(assignment[assignment >= 0], minlength=leaders.shape[0])

    n_p = model.n_p
    pos_counts, neg_counts = counts[:n_p], counts[n_p:]
    pos_sum = float(np.sum(cic[:n_p] * pos_counts))
    neg_sum = float(np.sum(cic[n_p:] * neg_counts))
    score = (1.0 - model.alpha) * pos_sum + model.alpha * neg_sum
    return PatchScore(score=score, pos_hits=int(pos_counts.sum()), neg_hits=int(neg_counts.sum()))


def score_slide(model: EvidenceModel, slide: SlideDescriptorSet, threads: int = 0) -> ScoreMap:
    """
    Carte de scores de toute la grille

    Les patchs de moins de `patch_skip_threshold` descripteurs sont ignorés
    (inégalité stricte). Le parallélisme par patch ne change aucun résultat.
    """
    if slide.patch_size_px != model.params.patch_size_px:
        raise ConfigurationError(
            f"taille de patch de la lame ({slide.patch_size_px}) différente de celle du modèle "
            f"({model.params.patch_size_px})"
        )
    if model.n_features == 0:
        raise ModelError("modèle vide: aucune caractéristique d'évidence")

    threshold = model.params.patch_skip_threshold
    keys = list(slide.patches())
    counts = [slide.count(X, Y) for X, Y in keys]
    active = [i for i, n in enumerate(counts) if n >= threshold]

    def _score(i: int) -> PatchScore:
        X, Y = keys[i]
        return score_patch(model, slide.patch_descriptors(X, Y))

    workers = min(resolve_threads(threads), max(1, len(active)))
    if workers <= 1:
        results = [_score(i) for i in active]
    else:
        with ThreadPoolExecutor(max_workers=workers) as executor:
            results = list(executor.map(_score, active))
    by_index = dict(zip(active, results))

    cells: List[ScoreCell] = []
    for i, ((X, Y), n) in enumerate(zip(keys, counts)):
        result: Optional[PatchScore] = by_index.get(i)
        if result is None:
            cells.append(ScoreCell(X=X, Y=Y, n_descriptors=n, skipped=True))
        else:
            cells.append(ScoreCell(
                X=X, Y=Y, n_descriptors=n, skipped=False,
                score=result.score, pos_hits=result.pos_hits, neg_hits=result.neg_hits,
            ))

    if not active:
        logger.warning(f"⚠️ Lame {slide.slide_id}: tous les patchs sont sous le seuil de {threshold} descripteurs")
    else:
        positive = sum(1 for r in results if r.score > 0)
        logger.info(f"🗺️ Lame {slide.slide_id}: {len(active)} patchs évalués, {positive} positifs")
    return ScoreMap(slide_id=slide.slide_id, cols=slide.cols, rows=slide.rows, cells=cells)


def classify(score: float) -> Classification:
    """Cancer si C_KL(X, Y | I) > 0 (strict)"""
    return Classification.cancer if score > 0 else Classification.not_cancer
