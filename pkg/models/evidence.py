"""
Modèle d'évidence : caractéristiques leaders acceptées et paramètres d'ajustement
"""

from enum import Enum
from functools import cached_property
from typing import Any, Dict, List, Tuple

import numpy as np
from pydantic import BaseModel, Field, model_validator

from core.config import LogBase
from models.descriptors import DESCRIPTOR_MAX, DESCRIPTOR_SIZE

FORMAT_VERSION = 1


class Polarity(str, Enum):
    positive = "positive"
    negative = "negative"


class MatchParams(BaseModel, frozen=True):
    # Distance euclidienne ; deux descripteurs sont « égaux » si distance < seuil
    match_threshold: float = Field(default=325.0, gt=0)
    min_occurrences: int = Field(default=10, ge=1)
    acceptance_ratio: float = Field(default=2.0, gt=1)


class ModelParams(MatchParams, frozen=True):
    patch_skip_threshold: int = Field(default=3000, ge=0)
    patch_size_px: int = Field(default=512, gt=0)


class EvidenceFeature(BaseModel, frozen=True):
    leader: List[float] = Field(min_length=DESCRIPTOR_SIZE, max_length=DESCRIPTOR_SIZE)
    count_p: int = Field(ge=0)
    count_n: int = Field(ge=0)
    rho_p: float = Field(ge=0.0, le=1.0)
    cic: float
    polarity: Polarity

    @model_validator(mode="after")
    def check_consistency(self) -> "EvidenceFeature":
        total = self.count_p + self.count_n
        if total == 0:
            raise ValueError("caractéristique sans occurrence")
        if abs(self.rho_p - self.count_p / total) > 1e-12:
            raise ValueError("rho_p incohérent avec count_p / (count_p + count_n)")
        if any(not (0.0 <= v <= DESCRIPTOR_MAX) for v in self.leader):
            raise ValueError("leader hors de l'intervalle [0, 255]")
        positive = self.polarity == Polarity.positive
        if positive and not (self.cic > 0 and self.rho_p > 0.5):
            raise ValueError("caractéristique positive avec cic <= 0")
        if not positive and not (self.cic < 0 and self.rho_p < 0.5):
            raise ValueError("caractéristique négative avec cic >= 0")
        return self


class EvidenceModel(BaseModel):
    """
    Artefact sérialisable de l'apprentissage

    Le dictionnaire combiné (positives puis négatives) sert à l'affectation
    au plus proche leader lors du calcul des scores.
    """
    positives: List[EvidenceFeature] = Field(default_factory=list)
    negatives: List[EvidenceFeature] = Field(default_factory=list)
    alpha: float = Field(ge=0.0, le=1.0)
    params: ModelParams = Field(default_factory=ModelParams)
    log_base: LogBase = "e"
    provenance: Dict[str, Any] = Field(default_factory=dict)

    @model_validator(mode="after")
    def check_invariants(self) -> "EvidenceModel":
        if any(f.polarity != Polarity.positive for f in self.positives):
            raise ValueError("une caractéristique de `positives` n'est pas positive")
        if any(f.polarity != Polarity.negative for f in self.negatives):
            raise ValueError("une caractéristique de `negatives` n'est pas négative")
        if self.n_features and abs(self.alpha - self.n_p / self.n_features) > 1e-12:
            raise ValueError("alpha doit valoir n_p / (n_p + n_n)")
        for feature in self.positives + self.negatives:
            if feature.count_p + feature.count_n < self.params.min_occurrences:
                raise ValueError("caractéristique sous la limite d'occurrences")
        return self

    @classmethod
    def from_features(cls, positives: List[EvidenceFeature], negatives: List[EvidenceFeature], **kwargs) -> "EvidenceModel":
        total = len(positives) + len(negatives)
        alpha = len(positives) / total if total else 0.0
        return cls(positives=positives, negatives=negatives, alpha=alpha, **kwargs)

    @property
    def n_p(self) -> int:
        return len(self.positives)

    @property
    def n_n(self) -> int:
        return len(self.negatives)

    @property
    def n_features(self) -> int:
        return self.n_p + self.n_n

    @property
    def features(self) -> List[EvidenceFeature]:
        return self.positives + self.negatives

    @cached_property
    def union_codebook(self) -> Tuple[np.ndarray, np.ndarray]:
        """(leaders (M, 128), cic (M,)) avec les positives en tête"""
        features = self.features
        if not features:
            return np.empty((0, DESCRIPTOR_SIZE)), np.empty(0)
        leaders = np.array([f.leader for f in features], dtype=np.float64)
        cic = np.array([f.cic for f in features], dtype=np.float64)
        return leaders, cic
