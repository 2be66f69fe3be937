"""
Lames synthétiques à rho^p planté : oracle de bureau pour toute la chaîne
"""

import logging
import math
from typing import Dict, List, Tuple

import numpy as np

from core.exceptions import SpecError
from models.descriptors import DESCRIPTOR_MAX, DESCRIPTOR_SIZE, SlideDescriptorSet
from models.evaluation import SyntheticSpec
from models.training import PatchLabel, PatchLabels
from services.features import build_slide_set

logger = logging.getLogger(__name__)

MAX_CENTER_ATTEMPTS = 10_000
# Marge d'arrondi des composantes entières : au plus 0.5 * sqrt(128)
ROUNDING_SLACK = 0.5 * math.sqrt(DESCRIPTOR_SIZE)


def sample_centers(spec: SyntheticSpec) -> np.ndarray:
    """
    Centres tirés uniformément dans [0, 255]^128, deux à deux à au moins
    `cluster_separation` ; tirage séquentiel, donc les k premiers centres ne
    dépendent que de `center_seed`.
    """
    # Perturbation <= seuil/4 : intra-grappe <= seuil/2, inter-grappes >= séparation - seuil/2
    if spec.cluster_separation - spec.match_threshold / 2 <= spec.match_threshold:
        raise SpecError(
            f"séparation {spec.cluster_separation} insuffisante pour le seuil {spec.match_threshold} "
            f"(il faut plus de 1.5 x seuil)"
        )
    if spec.cluster_separation >= DESCRIPTOR_MAX * math.sqrt(DESCRIPTOR_SIZE):
        raise SpecError(f"séparation {spec.cluster_separation} impossible dans la boîte [0, 255]^128")

    rng = np.random.default_rng(spec.center_seed)
    centers: List[np.ndarray] = []
    limit = spec.cluster_separation ** 2
    for _ in range(spec.n_clusters):
        for _attempt in range(MAX_CENTER_ATTEMPTS):
            candidate = rng.uniform(0.0, DESCRIPTOR_MAX, DESCRIPTOR_SIZE)
            if all(float(np.sum((candidate - c) ** 2)) >= limit for c in centers):
                centers.append(candidate)
                break
        else:
            raise SpecError(f"impossible de placer {spec.n_clusters} grappes à {spec.cluster_separation} d'écart")
    return np.asarray(centers)


def allocate(total: int, weights: np.ndarray) -> np.ndarray:
    """Répartition entière exacte de `total` selon `weights` (plus forts restes)"""
    if total == 0 or weights.sum() <= 0:
        return np.zeros(weights.shape[0], dtype=np.int64)
    quotas = total * weights / weights.sum()
    counts = np.floor(quotas).astype(np.int64)
    shortfall = total - int(counts.sum())
    if shortfall:
        order = np.argsort(-(quotas - counts), kind="stable")
        counts[order[:shortfall]] += 1
    return counts


def patch_labels(spec: SyntheticSpec) -> PatchLabels:
    """
    Région tumorale en disque centré couvrant ~`tumor_fraction` de la grille

    Avec `boundary_excluded`, les patchs traversés par le bord du disque sont
    étiquetés `excluded` (pas de ligne de démarcation précise).
    """
    cx, cy = spec.cols / 2.0, spec.rows / 2.0
    radius = math.sqrt(spec.tumor_fraction * spec.cols * spec.rows / math.pi)
    labels: PatchLabels = {}
    for Y in range(spec.rows):
        for X in range(spec.cols):
            farthest = max(math.hypot(X + dx - cx, Y + dy - cy) for dx in (0, 1) for dy in (0, 1))
            nearest = math.hypot(min(max(cx, X), X + 1) - cx, min(max(cy, Y), Y + 1) - cy)
            if farthest <= radius:
                label = PatchLabel.cancer
            elif nearest >= radius:
                label = PatchLabel.normal
            elif spec.boundary_excluded:
                label = PatchLabel.excluded
            else:
                centre = math.hypot(X + 0.5 - cx, Y + 0.5 - cy)
                label = PatchLabel.cancer if centre < radius else PatchLabel.normal
            labels[(X, Y)] = label
    return labels


def class_masses(rhos: np.ndarray) -> Tuple[Dict[PatchLabel, np.ndarray], float]:
    """
    Masse de chaque grappe par classe de patch, et normalisateur commun

    Cancer : rho_c, normal : 1 - rho_c, exclu : 1/2. Le même normalisateur
    (la plus petite masse totale non nulle) sert aux deux classes, donc à
    nombres de patchs égaux N_p(c) / (N_p(c) + N_n(c)) = rho_c, que la plante
    soit équilibrée ou non. La classe la plus lourde reçoit plus de descripteurs.
    """
    masses = {
        PatchLabel.cancer: rhos,
        PatchLabel.normal: 1.0 - rhos,
        PatchLabel.excluded: np.full(rhos.shape, 0.5),
    }
    totals = [float(masses[label].sum()) for label in (PatchLabel.cancer, PatchLabel.normal)]
    return masses, min(t for t in totals if t > 0)


def _perturb(rng: np.random.Generator, center: np.ndarray, count: int, radius: float) -> np.ndarray:
    directions = rng.normal(size=(count, DESCRIPTOR_SIZE))
    directions /= np.linalg.norm(directions, axis=1, keepdims=True)
    lengths = rng.uniform(0.0, radius, size=(count, 1))
    points = np.clip(np.rint(center + directions * lengths), 0.0, DESCRIPTOR_MAX)
    return points.astype(np.uint8)


def synth_slide(spec: SyntheticSpec) -> Tuple[SlideDescriptorSet, PatchLabels]:
    """
    Génère une lame et ses étiquettes

    Un patch cancer répartit ses descripteurs entre grappes en proportion de
    rho_c, un patch normal en proportion de 1 - rho_c ; un patch exclu prend
    un mélange moitié-moitié. Le nombre tiré dans [descriptors_min,
    descriptors_max] vaut pour la classe la plus légère ; avec une plante
    déséquilibrée, les patchs de l'autre classe en reçoivent davantage.
    Chaque descripteur reste à moins de seuil/4 du centre de sa grappe.
    """
    centers = sample_centers(spec)
    rhos = np.asarray(spec.rhos(), dtype=np.float64)
    radius = spec.match_threshold / 4.0 - ROUNDING_SLACK
    labels = patch_labels(spec)
    rng = np.random.default_rng(spec.seed)

    masses, norm = class_masses(rhos)

    size = spec.patch_size_px
    xs, ys, blocks = [], [], []
    for Y in range(spec.rows):
        for X in range(spec.cols):
            if spec.background_fraction and rng.random() < spec.background_fraction:
                total = int(rng.integers(0, spec.background_max + 1))
            else:
                total = int(rng.integers(spec.descriptors_min, spec.descriptors_max + 1))
            weights = masses[labels[(X, Y)]]
            per_cluster = allocate(int(round(total * weights.sum() / norm)), weights)
            total = int(per_cluster.sum())
            parts = [_perturb(rng, centers[c], n, radius) for c, n in enumerate(per_cluster.tolist()) if n]
            if parts:
                patch = np.concatenate(parts)
                blocks.append(patch[rng.permutation(total)])
            xs.append(rng.integers(X * size, (X + 1) * size, size=total))
            ys.append(rng.integers(Y * size, (Y + 1) * size, size=total))

    descriptors = np.concatenate(blocks) if blocks else np.empty((0, DESCRIPTOR_SIZE), dtype=np.uint8)
    slide = build_slide_set(
        spec.slide_id,
        np.concatenate(xs) if xs else np.empty(0, dtype=np.int64),
        np.concatenate(ys) if ys else np.empty(0, dtype=np.int64),
        descriptors,
        patch_size_px=size,
        width_px=spec.cols * size,
        height_px=spec.rows * size,
    )
    logger.info(
        f"🧪 Lame synthétique {spec.slide_id}: {spec.cols}x{spec.rows} patchs, "
        f"{len(slide)} descripteurs, {spec.n_clusters} grappes"
    )
    return slide, labels
