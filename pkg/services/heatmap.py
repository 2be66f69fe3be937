"""
Rendu de la carte de scores : cancer en bleu, normal en rouge, patchs ignorés en gris
"""

import logging
from pathlib import Path
from typing import Tuple, Union

import numpy as np
from PIL import Image

from core.exceptions import InvalidArgumentError, StorageError
from models.scores import ScoreCell, ScoreMap

logger = logging.getLogger(__name__)

Color = Tuple[int, int, int]

WHITE: Color = (255, 255, 255)
GRAY: Color = (128, 128, 128)
SCALE_PERCENTILE = 95.0


def score_scale(score_map: ScoreMap) -> float:
    """95e centile de |score| sur les patchs évalués (0 si aucun)"""
    magnitudes = np.abs([c.score for c in score_map.scored()])
    if magnitudes.size == 0:
        return 0.0
    return float(np.percentile(magnitudes, SCALE_PERCENTILE))


def cell_color(cell: ScoreCell, scale: float) -> Color:
    if cell.skipped:
        return GRAY
    score = cell.score
    if score == 0:
        return WHITE
    intensity = 1.0 if scale <= 0 else min(1.0, abs(score) / scale)
    # Au moins un cran sous 255 : un score non nul n'est jamais rendu blanc
    fade = min(254, int(round(255 * (1.0 - intensity))))
    if score > 0:
        return (fade, fade, 255)
    return (255, fade, fade)


def heatmap_image(score_map: ScoreMap, block_px: int = 4) -> Image.Image:
    if score_map.cols * score_map.rows == 0:
        raise InvalidArgumentError("carte de scores vide")
    if block_px < 1:
        raise InvalidArgumentError(f"taille de bloc invalide: {block_px}")

    scale = score_scale(score_map)
    pixels = np.zeros((score_map.rows, score_map.cols, 3), dtype=np.uint8)
    for cell in score_map.cells:
        pixels[cell.Y, cell.X] = cell_color(cell, scale)
    pixels = np.repeat(np.repeat(pixels, block_px, axis=0), block_px, axis=1)
    return Image.fromarray(pixels, mode="RGB")


def render_heatmap(score_map: ScoreMap, out: Union[str, Path], block_px: int = 4) -> Image.Image:
    """Écrit la carte en PPM binaire (P6), un bloc de `block_px` pixels par patch"""
    image = heatmap_image(score_map, block_px)
    try:
        image.save(out, format="PPM")
    except OSError as e:
        raise StorageError(f"Écriture impossible de {out}: {e}") from e
    logger.info(f"🎨 Carte de chaleur écrite: {out} ({image.width}x{image.height})")
    return image
