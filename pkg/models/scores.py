from enum import Enum
from typing import Dict, Iterator, List, Optional, Tuple

from pydantic import BaseModel, Field, model_validator

from models.descriptors import PatchKey


class Classification(str, Enum):
    cancer = "cancer"
    not_cancer = "not_cancer"


class PatchScore(BaseModel, frozen=True):
    score: float
    pos_hits: int = 0
    neg_hits: int = 0


class ScoreCell(BaseModel, frozen=True):
    X: int
    Y: int
    n_descriptors: int = Field(ge=0)
    skipped: bool
    # Absent pour un patch ignoré : aucune affirmation de classification
    score: Optional[float] = None
    pos_hits: int = 0
    neg_hits: int = 0

    @model_validator(mode="after")
    def skipped_has_no_score(self) -> "ScoreCell":
        if self.skipped and self.score is not None:
            raise ValueError("un patch ignoré ne porte pas de score")
        if not self.skipped and self.score is None:
            raise ValueError("score manquant pour un patch évalué")
        return self


class ScoreMap(BaseModel):
    """Distribution spatiale C_KL(X, Y | I), cellules en ordre raster"""
    slide_id: str
    cols: int = Field(ge=0)
    rows: int = Field(ge=0)
    cells: List[ScoreCell]

    @model_validator(mode="after")
    def covers_grid(self) -> "ScoreMap":
        if len(self.cells) != self.cols * self.rows:
            raise ValueError("la carte doit couvrir toute la grille")
        return self

    def cell(self, X: int, Y: int) -> ScoreCell:
        return self.cells[Y * self.cols + X]

    def by_key(self) -> Dict[PatchKey, ScoreCell]:
        return {(c.X, c.Y): c for c in self.cells}

    def scored(self) -> Iterator[ScoreCell]:
        return (c for c in self.cells if not c.skipped)

    def scores(self) -> List[Tuple[PatchKey, float]]:
        return [((c.X, c.Y), c.score) for c in self.scored()]
