"""
Descripteurs locaux : découpage en patchs, ordre canonique, extraction dense
"""

import logging
import math
from typing import Optional, Tuple, Union

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from PIL import Image, UnidentifiedImageError

from core.exceptions import DescriptorValidationError, FormatError, InvalidArgumentError
from models.descriptors import (
    DESCRIPTOR_MAX,
    DESCRIPTOR_SIZE,
    ExtractionParams,
    SlideDescriptorSet,
    compact_descriptors,
    validate_descriptors,
)

logger = logging.getLogger(__name__)

N_ORIENTATIONS = 8
N_CELLS = 4


def patch_index(x: int, y: int, patch_size: int) -> Tuple[int, int]:
    """Coordonnées (X, Y) du patch contenant le pixel (x, y)"""
    if x < 0 or y < 0:
        raise InvalidArgumentError(f"coordonnée négative ({x}, {y})")
    if patch_size <= 0:
        raise InvalidArgumentError(f"taille de patch invalide: {patch_size}")
    return (x // patch_size, y // patch_size)


def grid_dims(width: int, height: int, patch_size: int) -> Tuple[int, int]:
    """(colonnes, lignes) de la grille de patchs couvrant l'image"""
    if width <= 0 or height <= 0 or patch_size <= 0:
        raise InvalidArgumentError(f"dimensions invalides ({width}, {height}, {patch_size})")
    return (math.ceil(width / patch_size), math.ceil(height / patch_size))


def build_slide_set(
    slide_id: str,
    xs: np.ndarray,
    ys: np.ndarray,
    descriptors: np.ndarray,
    patch_size_px: int = 512,
    width_px: Optional[int] = None,
    height_px: Optional[int] = None,
) -> SlideDescriptorSet:
    """
    Regroupe des enregistrements en patchs dans l'ordre canonique

    Tri stable par (Y, X) du patch : l'ordre d'entrée est conservé dans
    chaque patch. Sans dimensions explicites, la grille est la plus petite
    grille de patchs entiers contenant tous les enregistrements.
    """
    xs = np.asarray(xs, dtype=np.int64).reshape(-1)
    ys = np.asarray(ys, dtype=np.int64).reshape(-1)
    descriptors = np.asarray(descriptors)
    if descriptors.size == 0:
        descriptors = descriptors.reshape(0, DESCRIPTOR_SIZE)
    if not (xs.shape[0] == ys.shape[0] == descriptors.shape[0]):
        raise DescriptorValidationError("nombre de coordonnées et de descripteurs différent")
    validate_descriptors(descriptors)
    if patch_size_px <= 0:
        raise InvalidArgumentError(f"taille de patch invalide: {patch_size_px}")
    if xs.size and (xs.min() < 0 or ys.min() < 0):
        raise DescriptorValidationError("coordonnée de point clé négative")

    if width_px is None:
        width_px = _whole_patches(int(xs.max()) + 1 if xs.size else 1, patch_size_px)
    if height_px is None:
        height_px = _whole_patches(int(ys.max()) + 1 if ys.size else 1, patch_size_px)
    if width_px <= 0 or height_px <= 0:
        raise InvalidArgumentError(f"dimensions de lame invalides ({width_px}, {height_px})")
    if xs.size and (xs.max() >= width_px or ys.max() >= height_px):
        raise DescriptorValidationError(f"point clé hors de la lame {width_px}x{height_px}")

    cols, _ = grid_dims(width_px, height_px, patch_size_px)
    pX = xs // patch_size_px
    pY = ys // patch_size_px
    order = np.argsort(pY * cols + pX, kind="stable")

    xs, ys = xs[order], ys[order]
    descriptors = compact_descriptors(descriptors[order])
    linear = (pY * cols + pX)[order]

    index = {}
    if linear.size:
        starts = np.flatnonzero(np.r_[True, linear[1:] != linear[:-1]])
        stops = np.r_[starts[1:], linear.size]
        for start, stop in zip(starts.tolist(), stops.tolist()):
            cell = int(linear[start])
            index[(cell % cols, cell // cols)] = slice(start, stop)

    for array in (xs, ys, descriptors):
        array.setflags(write=False)

    return SlideDescriptorSet(
        slide_id=slide_id,
        width_px=int(width_px),
        height_px=int(height_px),
        patch_size_px=patch_size_px,
        xs=xs,
        ys=ys,
        descriptors=descriptors,
        patch_index=index,
    )


def _whole_patches(extent: int, patch_size: int) -> int:
    return math.ceil(extent / patch_size) * patch_size


def load_raster(path: str) -> np.ndarray:
    """Lit une image quelconque et la convertit en niveaux de gris 8 bits (luminance)"""
    try:
        with Image.open(path) as image:
            return np.asarray(image.convert("L"), dtype=np.uint8)
    except (UnidentifiedImageError, ValueError) as e:
        raise FormatError(f"Raster non supporté {path}: {e}") from e


def _as_gray(image: Union[np.ndarray, Image.Image]) -> np.ndarray:
    if isinstance(image, Image.Image):
        return np.asarray(image.convert("L"), dtype=np.uint8)
    array = np.asarray(image)
    if array.ndim == 3 and array.shape[2] in (3, 4):
        return np.asarray(Image.fromarray(array[..., :3].astype(np.uint8), mode="RGB").convert("L"))
    if array.ndim != 2 or array.dtype != np.uint8:
        raise FormatError(f"raster non supporté: dtype={array.dtype}, forme={array.shape}")
    return array


def orientation_histograms(gray: np.ndarray) -> np.ndarray:
    """
    Magnitude du gradient répartie sur 8 orientations, shape (H, W, 8)

    Affectation dure au secteur de 45° contenant l'angle ; un gradient
    purement horizontal tombe dans le secteur 0 ou 4.
    """
    gy, gx = np.gradient(gray.astype(np.float64))
    magnitude = np.hypot(gx, gy)
    angle = np.mod(np.arctan2(gy, gx), 2.0 * np.pi)
    bins = np.floor(angle / (2.0 * np.pi / N_ORIENTATIONS)).astype(np.int64) % N_ORIENTATIONS

    binned = np.zeros(gray.shape + (N_ORIENTATIONS,), dtype=np.float64)
    rows, cols = np.indices(gray.shape)
    binned[rows, cols, bins] = magnitude
    return binned


def extract_descriptors(
    image: Union[np.ndarray, Image.Image],
    params: Optional[ExtractionParams] = None,
    slide_id: str = "slide",
) -> SlideDescriptorSet:
    """
    Extraction dense de descripteurs à histogrammes de gradients

    Points clés sur une grille de pas `stride_px` ; fenêtre de 4x4 cellules de
    `cell_px` pixels, 8 orientations par cellule (128 valeurs), normalisation
    L2 puis mise à l'échelle dans [0, 255]. Les fenêtres sans énergie de
    gradient sont ignorées. Déterministe octet pour octet.
    """
    params = params or ExtractionParams()
    gray = _as_gray(image)
    if gray.size == 0:
        raise FormatError("raster vide")

    height, width = gray.shape
    window = params.window_px
    binned = orientation_histograms(gray)

    xs, ys, rows = [], [], []
    if height >= window and width >= window:
        # Vue (ny, nx, 8, window, window) sans copie, parcourue ligne par ligne
        windows = sliding_window_view(binned, (window, window), axis=(0, 1))[::params.stride_px, ::params.stride_px]
        for j in range(windows.shape[0]):
            line = windows[j]
            nx = line.shape[0]
            cells = line.reshape(nx, N_ORIENTATIONS, N_CELLS, params.cell_px, N_CELLS, params.cell_px).sum(axis=(3, 5))
            raw = cells.transpose(0, 2, 3, 1).reshape(nx, DESCRIPTOR_SIZE)
            norms = np.sqrt(np.sum(raw * raw, axis=1))
            keep = norms > 0
            if not np.any(keep):
                continue
            scaled = np.minimum(raw[keep] / norms[keep, None] * DESCRIPTOR_MAX, DESCRIPTOR_MAX)
            top = j * params.stride_px
            lefts = np.arange(nx, dtype=np.int64)[keep] * params.stride_px
            xs.append(lefts + window // 2)
            ys.append(np.full(lefts.shape, top + window // 2, dtype=np.int64))
            rows.append(scaled)

    if rows:
        descriptors = np.concatenate(rows)
        all_xs, all_ys = np.concatenate(xs), np.concatenate(ys)
    else:
        descriptors = np.empty((0, DESCRIPTOR_SIZE))
        all_xs = all_ys = np.empty(0, dtype=np.int64)
        logger.warning("⚠️ Aucun descripteur extrait (gradient nul partout)")

    logger.info(f"🔬 {len(all_xs)} descripteurs extraits ({width}x{height} px, pas {params.stride_px})")
    return build_slide_set(
        slide_id, all_xs, all_ys, descriptors,
        patch_size_px=params.patch_size_px, width_px=width, height_px=height,
    )
