"""
État de l'apprentissage rapide (sélection itérative de patchs)
"""

from enum import Enum
from typing import Dict, List, Optional

from pydantic import BaseModel, Field, model_validator

from core.exceptions import ConfigurationError
from models.descriptors import PatchKey, PatchRef
from models.scores import ScoreMap


class PatchLabel(str, Enum):
    cancer = "cancer"
    normal = "normal"
    # Frontière imprécise : ni sélectionnable ni évalué
    excluded = "excluded"


PatchLabels = Dict[PatchKey, PatchLabel]


class SelectionCriterion(str, Enum):
    high_density = "high_density"
    worst = "worst"
    deterioration = "deterioration"
    no_information = "no_information"


class ScheduleStep(BaseModel, frozen=True):
    criteria: List[SelectionCriterion] = Field(min_length=1)
    # None : répéter jusqu'à épuisement du budget
    repeat: Optional[int] = Field(default=1, ge=1)

    def token(self) -> str:
        names = "-".join(c.value for c in self.criteria)
        if self.repeat is None:
            return f"{names}*"
        return names if self.repeat == 1 else f"{names}*{self.repeat}"


class ScheduleConfig(BaseModel, frozen=True):
    steps: List[ScheduleStep] = Field(min_length=1)
    budget_per_class: int = Field(default=20, ge=1)
    per_round_k: int = Field(default=2, ge=1)

    @classmethod
    def parse(cls, text: str, budget_per_class: int = 20, per_round_k: int = 2) -> "ScheduleConfig":
        """
        Analyse une liste de jetons, ex. "high_density-worst-deterioration*3,worst*"

        Chaque jeton est une suite de critères séparés par '-', suivie d'un
        nombre de répétitions optionnel '*N' ou de '*' (jusqu'au budget).
        """
        steps = []
        for raw in text.split(","):
            token = raw.strip()
            if not token:
                continue
            names, _, repeat_text = token.partition("*")
            repeat: Optional[int] = 1
            if "*" in token:
                repeat = None if repeat_text == "" else _parse_repeat(repeat_text, token)
            try:
                criteria = [SelectionCriterion(name.strip()) for name in names.split("-")]
            except ValueError as e:
                raise ConfigurationError(f"Critère inconnu dans '{token}'") from e
            steps.append(ScheduleStep(criteria=criteria, repeat=repeat))
        if not steps:
            raise ConfigurationError("Programme d'apprentissage vide")
        return cls(steps=steps, budget_per_class=budget_per_class, per_round_k=per_round_k)

    def token(self) -> str:
        return ",".join(step.token() for step in self.steps)


def _parse_repeat(text: str, token: str) -> int:
    try:
        repeat = int(text)
    except ValueError as e:
        raise ConfigurationError(f"Répétition invalide dans '{token}'") from e
    if repeat < 1:
        raise ConfigurationError(f"Répétition invalide dans '{token}'")
    return repeat


class RoundRecord(BaseModel):
    index: int
    criterion: SelectionCriterion
    slide_id: str
    added_p: List[PatchRef]
    added_n: List[PatchRef]
    n_p: int
    n_n: int
    alpha: float


class TrainState(BaseModel):
    selected_p: List[PatchRef] = Field(default_factory=list)
    selected_n: List[PatchRef] = Field(default_factory=list)
    # Cartes de scores de la lame d'apprentissage, une par round (non sérialisées)
    round_scores: List[ScoreMap] = Field(default_factory=list, exclude=True)
    rounds: List[RoundRecord] = Field(default_factory=list)
    budget_per_class: int = Field(default=20, ge=1)
    per_round_k: int = Field(default=2, ge=1)
    patch_skip_threshold: int = Field(default=3000, ge=0)

    @model_validator(mode="after")
    def disjoint_selections(self) -> "TrainState":
        if set(self.selected_p) & set(self.selected_n):
            raise ValueError("un patch ne peut être à la fois cancer et normal")
        return self

    def selected(self) -> set:
        return set(self.selected_p) | set(self.selected_n)

    def remaining(self) -> tuple:
        return (max(0, self.budget_per_class - len(self.selected_p)),
                max(0, self.budget_per_class - len(self.selected_n)))
