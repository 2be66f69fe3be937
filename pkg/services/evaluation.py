"""
Évaluation quantitative des cartes de scores : histogrammes et courbe ROC
"""

import logging
import math
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy.integrate import trapezoid
from scipy.stats import mannwhitneyu

from core.exceptions import EvaluationError, InvalidArgumentError
from models.evaluation import HistogramBin, RocResult
from models.scores import ScoreMap
from models.training import PatchLabel, PatchLabels

logger = logging.getLogger(__name__)

DEFAULT_BINS = 50


def labeled_scores(score_map: ScoreMap, labels: PatchLabels) -> Tuple[np.ndarray, np.ndarray]:
    """Scores des patchs évalués étiquetés (cancer, normal) ; les patchs ignorés sont exclus"""
    cancer, normal = [], []
    for cell in score_map.scored():
        label = labels.get((cell.X, cell.Y))
        if label == PatchLabel.cancer:
            cancer.append(cell.score)
        elif label == PatchLabel.normal:
            normal.append(cell.score)
    return np.array(cancer, dtype=np.float64), np.array(normal, dtype=np.float64)


def default_bin_width(scores: Sequence[float]) -> float:
    if len(scores) == 0:
        return 1.0
    spread = float(np.max(scores) - np.min(scores))
    return spread / DEFAULT_BINS if spread > 0 else 1.0


def histogram(score_map: ScoreMap, labels: PatchLabels, bin_width: Optional[float] = None) -> List[HistogramBin]:
    """
    Histogramme des scores par classe, un bord de classe exactement en 0

    Classe i = [i * largeur, (i + 1) * largeur) ; toutes les classes entre la
    première et la dernière occupées sont émises, même vides.
    """
    cancer, normal = labeled_scores(score_map, labels)
    every = np.concatenate([cancer, normal])
    if every.size == 0:
        return []
    if bin_width is None:
        bin_width = default_bin_width(every)
    if not bin_width > 0:
        raise InvalidArgumentError(f"largeur de classe invalide: {bin_width}")

    index_c = np.floor(cancer / bin_width).astype(np.int64)
    index_n = np.floor(normal / bin_width).astype(np.int64)
    lo = int(min(index_c.min(initial=np.iinfo(np.int64).max), index_n.min(initial=np.iinfo(np.int64).max)))
    hi = int(max(index_c.max(initial=np.iinfo(np.int64).min), index_n.max(initial=np.iinfo(np.int64).min)))

    counts_c = np.bincount(index_c - lo, minlength=hi - lo + 1)
    counts_n = np.bincount(index_n - lo, minlength=hi - lo + 1)
    return [
        HistogramBin(
            bin_lo=(lo + i) * bin_width,
            bin_hi=(lo + i + 1) * bin_width,
            cancer=int(counts_c[i]),
            normal=int(counts_n[i]),
        )
        for i in range(hi - lo + 1)
    ]


def mann_whitney_auc(cancer_scores: Sequence[float], normal_scores: Sequence[float]) -> float:
    """P(score_cancer > score_normal) + 1/2 P(égalité), via la statistique U"""
    cancer_scores = np.asarray(cancer_scores, dtype=np.float64)
    normal_scores = np.asarray(normal_scores, dtype=np.float64)
    if cancer_scores.size == 0 or normal_scores.size == 0:
        raise EvaluationError("AUC indéfinie: il faut des patchs cancer et normaux")
    u = mannwhitneyu(cancer_scores, normal_scores, alternative="two-sided").statistic
    return float(u) / (cancer_scores.size * normal_scores.size)


def roc_auc(score_map: ScoreMap, labels: PatchLabels) -> RocResult:
    """
    Courbe ROC par balayage des scores distincts, AUC par la méthode des trapèzes

    Raises:
        EvaluationError: une seule classe parmi les patchs évalués étiquetés
    """
    cancer, normal = labeled_scores(score_map, labels)
    if cancer.size == 0 or normal.size == 0:
        raise EvaluationError(
            f"AUC indéfinie: {cancer.size} patchs cancer et {normal.size} patchs normaux évalués"
        )

    scores = np.concatenate([cancer, normal])
    truth = np.concatenate([np.ones(cancer.size), np.zeros(normal.size)])
    order = np.argsort(-scores, kind="mergesort")
    scores, truth = scores[order], truth[order]

    distinct = np.flatnonzero(np.diff(scores))
    threshold_idxs = np.r_[distinct, truth.size - 1]
    tps = np.cumsum(truth)[threshold_idxs]
    fps = 1 + threshold_idxs - tps

    tpr = np.r_[0.0, tps / cancer.size]
    fpr = np.r_[0.0, fps / normal.size]
    thresholds = np.r_[math.inf, scores[threshold_idxs]]
    auc = float(trapezoid(tpr, fpr))

    logger.info(f"📈 AUC = {auc:.4f} ({cancer.size} cancer, {normal.size} normaux)")
    return RocResult(thresholds=thresholds.tolist(), fpr=fpr.tolist(), tpr=tpr.tolist(), auc=min(1.0, max(0.0, auc)))
