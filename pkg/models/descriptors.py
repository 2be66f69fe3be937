"""
Descripteurs locaux et leur regroupement en grille de patchs
"""

import math
from dataclasses import dataclass, field
from typing import Dict, Iterator, Tuple

import numpy as np
from pydantic import BaseModel, Field

from core.exceptions import DescriptorValidationError

DESCRIPTOR_SIZE = 128
DESCRIPTOR_MAX = 255.0

PatchKey = Tuple[int, int]


def validate_descriptors(descriptors: np.ndarray) -> np.ndarray:
    """Vérifie forme (N, 128) et bornes [0, 255] ; renvoie le tableau inchangé"""
    if descriptors.ndim != 2 or descriptors.shape[1] != DESCRIPTOR_SIZE:
        raise DescriptorValidationError(
            f"descripteurs de forme {descriptors.shape}, attendu (N, {DESCRIPTOR_SIZE})"
        )
    if descriptors.size and (not np.all(np.isfinite(descriptors))
                             or descriptors.min() < 0 or descriptors.max() > DESCRIPTOR_MAX):
        raise DescriptorValidationError("composante hors de l'intervalle [0, 255]")
    return descriptors


def compact_descriptors(descriptors: np.ndarray) -> np.ndarray:
    """uint8 si toutes les composantes sont entières, float64 sinon (valeurs d'entrée conservées)"""
    if descriptors.dtype == np.uint8:
        return descriptors
    as_float = np.asarray(descriptors, dtype=np.float64)
    if as_float.size == 0 or np.all(as_float == np.round(as_float)):
        return as_float.astype(np.uint8)
    return as_float


class ExtractionParams(BaseModel):
    stride_px: int = Field(default=8, gt=0)
    cell_px: int = Field(default=4, gt=0)
    patch_size_px: int = Field(default=512, gt=0)

    @property
    def window_px(self) -> int:
        # Grille spatiale 4x4 de cellules
        return 4 * self.cell_px


class PatchRef(BaseModel, frozen=True):
    slide_id: str
    X: int = Field(ge=0)
    Y: int = Field(ge=0)

    @property
    def key(self) -> PatchKey:
        return (self.X, self.Y)

    def sort_key(self) -> Tuple[str, int, int]:
        return (self.slide_id, self.Y, self.X)


@dataclass(frozen=True)
class PatchSample:
    """Descripteurs d'un patch T_XY, avec sa provenance"""
    ref: PatchRef
    descriptors: np.ndarray


@dataclass(frozen=True)
class SlideDescriptorSet:
    """
    Tous les descripteurs d'une lame, triés dans l'ordre canonique :
    patchs en ordre raster (Y puis X), puis ordre d'entrée dans chaque patch.
    Les tableaux sont en lecture seule ; l'objet se partage entre threads.
    """
    slide_id: str
    width_px: int
    height_px: int
    patch_size_px: int
    xs: np.ndarray
    ys: np.ndarray
    descriptors: np.ndarray
    patch_index: Dict[PatchKey, slice] = field(repr=False)

    @property
    def grid(self) -> Tuple[int, int]:
        return (math.ceil(self.width_px / self.patch_size_px), math.ceil(self.height_px / self.patch_size_px))

    @property
    def cols(self) -> int:
        return self.grid[0]

    @property
    def rows(self) -> int:
        return self.grid[1]

    def __len__(self) -> int:
        return int(self.xs.shape[0])

    def count(self, X: int, Y: int) -> int:
        bucket = self.patch_index.get((X, Y))
        return 0 if bucket is None else bucket.stop - bucket.start

    def bucket(self, X: int, Y: int) -> np.ndarray:
        """Indices (dans l'ordre canonique) des enregistrements du patch (X, Y)"""
        bucket = self.patch_index.get((X, Y))
        if bucket is None:
            return np.empty(0, dtype=np.int64)
        return np.arange(bucket.start, bucket.stop, dtype=np.int64)

    def patch_descriptors(self, X: int, Y: int) -> np.ndarray:
        bucket = self.patch_index.get((X, Y))
        if bucket is None:
            return self.descriptors[:0]
        return self.descriptors[bucket]

    def patch_counts(self) -> Dict[PatchKey, int]:
        return {key: s.stop - s.start for key, s in self.patch_index.items()}

    def sample(self, X: int, Y: int) -> PatchSample:
        return PatchSample(PatchRef(slide_id=self.slide_id, X=X, Y=Y), self.patch_descriptors(X, Y))

    def patches(self) -> Iterator[PatchKey]:
        """Toutes les cellules de la grille, en ordre raster"""
        cols, rows = self.grid
        for Y in range(rows):
            for X in range(cols):
                yield (X, Y)
