"""
Estimation des probabilités rho^p(f), information de classification et
sélection des caractéristiques d'évidence à partir de patchs étiquetés
"""

import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from typing import Any, Dict, List, Optional, Sequence, Union

import numpy as np
from scipy.spatial.distance import cdist
from scipy.special import xlogy

from core.config import LogBase
from core.exceptions import EmptyModelError, InvalidArgumentError, UndefinedProbabilityError
from models.descriptors import DESCRIPTOR_SIZE, PatchSample
from models.evidence import EvidenceFeature, EvidenceModel, MatchParams, ModelParams, Polarity

logger = logging.getLogger(__name__)

ArrayLike = Union[float, np.ndarray]

CHUNK_ROWS = 16384
LOG_BASES: Dict[str, float] = {"e": math.e, "2": 2.0}


def resolve_threads(threads: int = 0) -> int:
    """0 = automatique"""
    return threads if threads > 0 else (os.cpu_count() or 1)


def distance(a: np.ndarray, b: np.ndarray) -> float:
    """Distance euclidienne entre deux descripteurs de 128 composantes"""
    diff = np.asarray(a, dtype=np.float64) - np.asarray(b, dtype=np.float64)
    return math.sqrt(float(np.dot(diff, diff)))


def matches(a: np.ndarray, b: np.ndarray, params: MatchParams) -> bool:
    # Inégalité stricte : « inférieure à 325 »
    return distance(a, b) < params.match_threshold


def assign_to_codebook(descriptors: np.ndarray, codebook: np.ndarray, threshold: float) -> np.ndarray:
    """
    Leader le plus proche de chaque descripteur, -1 si aucun n'est à moins du seuil

    Égalité de distance : plus petit indice de leader (argmin).
    """
    n = descriptors.shape[0]
    assignment = np.full(n, -1, dtype=np.int64)
    if n == 0 or codebook.shape[0] == 0:
        return assignment
    codebook = np.asarray(codebook, dtype=np.float64)
    limit = threshold * threshold
    for start in range(0, n, CHUNK_ROWS):
        chunk = np.asarray(descriptors[start:start + CHUNK_ROWS], dtype=np.float64)
        d2 = cdist(chunk, codebook, metric="sqeuclidean")
        nearest = np.argmin(d2, axis=1)
        within = d2[np.arange(chunk.shape[0]), nearest] < limit
        assignment[start:start + chunk.shape[0]] = np.where(within, nearest, -1)
    return assignment


def count_tokens(descriptors: np.ndarray, codebook: np.ndarray, threshold: float) -> np.ndarray:
    """Nombre de descripteurs affectés à chaque leader (comptage de jetons)"""
    assignment = assign_to_codebook(descriptors, codebook, threshold)
    return np.bincount(assignment[assignment >= 0], minlength=codebook.shape[0]).astype(np.int64)


def build_codebook(descriptors: np.ndarray, params: MatchParams) -> np.ndarray:
    """
    Regroupement glouton par leaders dans l'ordre canonique

    Un descripteur sans leader à moins du seuil devient un nouveau leader.
    Traitement par blocs : les lignes déjà couvertes par un leader existant
    ne peuvent plus en créer, seules les autres sont parcourues une à une,
    ce qui reproduit exactement le balayage séquentiel.
    """
    descriptors = np.asarray(descriptors)
    if descriptors.shape[0] == 0:
        return np.empty((0, DESCRIPTOR_SIZE), dtype=np.float64)

    limit = params.match_threshold ** 2
    leaders = np.empty((0, DESCRIPTOR_SIZE), dtype=np.float64)
    block = 4096
    for start in range(0, descriptors.shape[0], block):
        chunk = np.asarray(descriptors[start:start + block], dtype=np.float64)
        if leaders.shape[0]:
            covered = (cdist(chunk, leaders, metric="sqeuclidean") < limit).any(axis=1)
        else:
            covered = np.zeros(chunk.shape[0], dtype=bool)

        pending = np.flatnonzero(~covered)
        created = np.empty((pending.size, DESCRIPTOR_SIZE), dtype=np.float64)
        n_created = 0
        for row in pending:
            candidate = chunk[row]
            if n_created:
                diff = created[:n_created] - candidate
                if np.min(np.einsum("ij,ij->i", diff, diff)) < limit:
                    continue
            created[n_created] = candidate
            n_created += 1
        if n_created:
            leaders = np.vstack([leaders, created[:n_created]])

    logger.debug(f"Dictionnaire: {leaders.shape[0]} leaders pour {descriptors.shape[0]} descripteurs")
    return leaders


def count_occurrences(leader: np.ndarray, records: np.ndarray, codebook: np.ndarray, params: MatchParams) -> int:
    """N(f | f in T) pour un leader du dictionnaire, par affectation au plus proche"""
    leader = np.asarray(leader, dtype=np.float64)
    codebook = np.asarray(codebook, dtype=np.float64)
    hits = np.flatnonzero(np.all(codebook == leader, axis=1))
    if hits.size == 0:
        raise InvalidArgumentError("le leader n'appartient pas au dictionnaire")
    counts = count_tokens(np.asarray(records).reshape(-1, DESCRIPTOR_SIZE), codebook, params.match_threshold)
    return int(counts[hits[0]])


def estimate_rho(count_p: int, count_n: int) -> float:
    """rho^p(f) = N(f | I^p) / (N(f | I^p) + N(f | I^n))"""
    total = count_p + count_n
    if total <= 0:
        raise UndefinedProbabilityError("rho^p indéfini: aucune occurrence")
    return count_p / total


def _check_rho(rho_p: ArrayLike) -> np.ndarray:
    rho = np.asarray(rho_p, dtype=np.float64)
    if np.any(~np.isfinite(rho)) or np.any(rho < 0.0) or np.any(rho > 1.0):
        raise InvalidArgumentError("rho^p doit être dans [0, 1]")
    return rho


def _scalar_or_array(value: np.ndarray, like: ArrayLike) -> ArrayLike:
    return float(value) if np.ndim(like) == 0 else value


def classification_information(rho_p: ArrayLike, log_base: LogBase = "e") -> ArrayLike:
    """
    C(rho) = rho log(2 rho) - (1 - rho) log(2 (1 - rho)), avec 0 log 0 = 0

    Positive pour rho > 1/2, nulle en 1/2, négative pour rho < 1/2.
    """
    rho = _check_rho(rho_p)
    value = xlogy(rho, 2.0 * rho) - xlogy(1.0 - rho, 2.0 * (1.0 - rho))
    if log_base != "e":
        value = value / math.log(LOG_BASES[log_base])
    return _scalar_or_array(value, rho_p)


def kl_divergence(rho_p: ArrayLike, log_base: LogBase = "e") -> ArrayLike:
    """D(rho) = rho log(2 rho) + (1 - rho) log(2 (1 - rho)), symétrique en rho <-> 1 - rho"""
    rho = _check_rho(rho_p)
    value = xlogy(rho, 2.0 * rho) + xlogy(1.0 - rho, 2.0 * (1.0 - rho))
    if log_base != "e":
        value = value / math.log(LOG_BASES[log_base])
    return _scalar_or_array(value, rho_p)


def accept_evidence(rho_p: float, count_p: int, count_n: int, params: MatchParams) -> Optional[Polarity]:
    """
    Critère d'acceptation : rho^p > r rho^n (positive) ou rho^n > r rho^p (négative)

    Évalué sur les comptes, équivalent et exact : rho^p / rho^n = count_p / count_n.
    """
    if count_p + count_n < params.min_occurrences:
        return None
    ratio = params.acceptance_ratio
    if count_p > ratio * count_n:
        return Polarity.positive
    if count_n > ratio * count_p:
        return Polarity.negative
    return None


def _canonical(samples: Sequence[PatchSample]) -> List[PatchSample]:
    return sorted(samples, key=lambda s: s.ref.sort_key())


def _count_over(samples: Sequence[PatchSample], codebook: np.ndarray, threshold: float, threads: int) -> np.ndarray:
    """Comptes par leader sur un ensemble de patchs ; sommes entières, indépendantes du parallélisme"""
    counts = np.zeros(codebook.shape[0], dtype=np.int64)
    if not samples:
        return counts
    workers = min(resolve_threads(threads), len(samples))
    if workers <= 1:
        for sample in samples:
            counts += count_tokens(sample.descriptors, codebook, threshold)
        return counts
    with ThreadPoolExecutor(max_workers=workers) as executor:
        for partial in executor.map(lambda s: count_tokens(s.descriptors, codebook, threshold), samples):
            counts += partial
    return counts


def fit_model(
    positive_patches: Sequence[PatchSample],
    negative_patches: Sequence[PatchSample],
    params: Optional[MatchParams] = None,
    log_base: LogBase = "e",
    threads: int = 0,
    provenance: Optional[Dict[str, Any]] = None,
) -> EvidenceModel:
    """
    Ajuste le modèle d'évidence sur I^p (cancer) et I^n (normal)

    Concaténation canonique (I^p puis I^n, patchs triés par lame puis Y, X)
    -> dictionnaire de leaders -> comptes par leader -> rho^p -> acceptation
    -> information de classification. alpha = n^p / (n^p + n^n).

    Raises:
        EmptyModelError: aucune caractéristique acceptée
    """
    params = params or ModelParams()
    if not isinstance(params, ModelParams):
        params = ModelParams(**params.model_dump())
    if not positive_patches or not negative_patches:
        raise InvalidArgumentError("I^p et I^n doivent être non vides")

    positives_sorted = _canonical(positive_patches)
    negatives_sorted = _canonical(negative_patches)
    training = np.concatenate(
        [np.asarray(s.descriptors).reshape(-1, DESCRIPTOR_SIZE) for s in positives_sorted + negatives_sorted]
    )
    codebook = build_codebook(training, params)

    counts_p = _count_over(positives_sorted, codebook, params.match_threshold, threads)
    counts_n = _count_over(negatives_sorted, codebook, params.match_threshold, threads)

    positives: List[EvidenceFeature] = []
    negatives: List[EvidenceFeature] = []
    for index in range(codebook.shape[0]):
        count_p, count_n = int(counts_p[index]), int(counts_n[index])
        if count_p + count_n == 0:
            continue
        rho = estimate_rho(count_p, count_n)
        polarity = accept_evidence(rho, count_p, count_n, params)
        if polarity is None:
            continue
        feature = EvidenceFeature(
            leader=codebook[index].tolist(),
            count_p=count_p,
            count_n=count_n,
            rho_p=rho,
            cic=classification_information(rho, log_base),
            polarity=polarity,
        )
        (positives if polarity == Polarity.positive else negatives).append(feature)

    if not positives and not negatives:
        raise EmptyModelError(
            f"aucune caractéristique d'évidence acceptée parmi {codebook.shape[0]} leaders"
        )

    record = {
        "slides": sorted({s.ref.slide_id for s in positives_sorted + negatives_sorted}),
        "patches_p": [[s.ref.slide_id, s.ref.X, s.ref.Y] for s in positives_sorted],
        "patches_n": [[s.ref.slide_id, s.ref.X, s.ref.Y] for s in negatives_sorted],
    }
    record.update(provenance or {})

    model = EvidenceModel.from_features(
        positives, negatives, params=params, log_base=log_base, provenance=record,
    )
    if not positives or not negatives:
        # alpha vaut 0 ou 1 : le seul côté présent est annulé, tous les scores valent 0
        logger.warning(
            f"⚠️ Modèle à une seule polarité (n_p={model.n_p}, n_n={model.n_n}): tous les scores seront nuls"
        )
    logger.info(
        f"🧮 Modèle ajusté: {codebook.shape[0]} leaders, n_p={model.n_p}, n_n={model.n_n}, alpha={model.alpha:.3f}"
    )
    return model


def rank_features(model: EvidenceModel, by: str = "cic") -> List[EvidenceFeature]:
    """
    Caractéristiques triées par utilité décroissante

    by="cic" : |C_KL| ; by="kl" : D_KL, qui ne distingue pas la polarité.
    """
    if by == "cic":
        key = lambda f: abs(f.cic)
    elif by == "kl":
        key = lambda f: kl_divergence(f.rho_p, model.log_base)
    else:
        raise InvalidArgumentError(f"critère de tri inconnu: {by}")
    return sorted(model.features, key=key, reverse=True)
