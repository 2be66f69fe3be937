"""
Apprentissage rapide : sélection itérative d'un petit budget de patchs par classe
"""

import logging
from typing import Any, Dict, List, Mapping, Optional, Tuple

from core.config import LogBase
from core.exceptions import EmptyModelError, LabelError, SelectionStateError
from models.descriptors import PatchKey, PatchRef, PatchSample, SlideDescriptorSet
from models.evidence import EvidenceModel, ModelParams
from models.scores import ScoreMap
from models.training import (
    PatchLabel,
    PatchLabels,
    RoundRecord,
    ScheduleConfig,
    SelectionCriterion,
    TrainState,
)
from services.evidence import fit_model
from services.scoring import score_slide

logger = logging.getLogger(__name__)

DEFAULT_SCHEDULE = "high_density-worst-deterioration*3,worst*"

Selection = Tuple[List[PatchRef], List[PatchRef]]


def _raster(key: PatchKey) -> Tuple[int, int]:
    return (key[1], key[0])


def eligible_patches(
    labels: PatchLabels,
    slide: SlideDescriptorSet,
    state: TrainState,
    label: PatchLabel,
    scores: Optional[ScoreMap] = None,
) -> List[PatchKey]:
    """Patchs étiquetés `label`, dans la grille, au-dessus du seuil et non encore choisis"""
    taken = {ref.key for ref in state.selected() if ref.slide_id == slide.slide_id}
    cols, rows = slide.grid
    keys = []
    for key, value in labels.items():
        if value != label or key in taken:
            continue
        X, Y = key
        if X >= cols or Y >= rows:
            continue
        if slide.count(X, Y) < state.patch_skip_threshold:
            continue
        if scores is not None and scores.cell(X, Y).skipped:
            continue
        keys.append(key)
    return sorted(keys, key=_raster)


def _top_k(keys: List[PatchKey], k: int, key_fn) -> List[PatchKey]:
    # Tri stable sur une liste déjà en ordre raster : les égalités suivent l'ordre raster
    return sorted(keys, key=key_fn)[:k]


def select_patches(
    criterion: SelectionCriterion,
    state: TrainState,
    labels: PatchLabels,
    slide: SlideDescriptorSet,
    k: int,
    k_n: Optional[int] = None,
    scores: Optional[ScoreMap] = None,
) -> Selection:
    """
    Choisit k patchs cancer et k patchs normaux selon un critère

    - high_density : plus grand nombre de descripteurs
    - worst : cancer au score le plus négatif, normal au score le plus positif
    - deterioration : score le plus dégradé par rapport au round précédent
    - no_information : |score| le plus proche de 0

    Args:
        k: nombre de patchs cancer (et normaux si `k_n` est absent)
        k_n: nombre de patchs normaux
        scores: carte courante ; par défaut la dernière de l'historique
    """
    k_p = k
    k_n = k if k_n is None else k_n
    current = scores
    previous: Optional[ScoreMap] = None

    if criterion == SelectionCriterion.deterioration:
        if len(state.round_scores) < 2:
            raise SelectionStateError("critère deterioration: il faut au moins deux rounds de scores")
        current, previous = state.round_scores[-1], state.round_scores[-2]
    elif criterion != SelectionCriterion.high_density and current is None:
        if not state.round_scores:
            raise SelectionStateError(f"critère {criterion.value}: aucune carte de scores disponible")
        current = state.round_scores[-1]

    picks: Dict[PatchLabel, List[PatchKey]] = {}
    for label, wanted in ((PatchLabel.cancer, k_p), (PatchLabel.normal, k_n)):
        if wanted == 0:
            picks[label] = []
            continue
        scored = None if criterion == SelectionCriterion.high_density else current
        pool = eligible_patches(labels, slide, state, label, scored)
        if len(pool) < wanted:
            raise SelectionStateError(
                f"{len(pool)} patchs {label.value} éligibles, {wanted} demandés ({criterion.value})"
            )
        # +1 pour cancer : un score bas est « mauvais » ; -1 pour normal
        sign = 1.0 if label == PatchLabel.cancer else -1.0

        if criterion == SelectionCriterion.high_density:
            chosen = _top_k(pool, wanted, lambda key: -slide.count(*key))
        elif criterion == SelectionCriterion.worst:
            chosen = _top_k(pool, wanted, lambda key: sign * current.cell(*key).score)
        elif criterion == SelectionCriterion.deterioration:
            pool = [key for key in pool if not previous.cell(*key).skipped]
            if len(pool) < wanted:
                raise SelectionStateError(f"pas assez de patchs {label.value} évalués sur deux rounds")
            chosen = _top_k(
                pool, wanted,
                lambda key: sign * (current.cell(*key).score - previous.cell(*key).score),
            )
        else:
            chosen = _top_k(pool, wanted, lambda key: abs(current.cell(*key).score))
        picks[label] = chosen

    as_refs = lambda keys: [PatchRef(slide_id=slide.slide_id, X=X, Y=Y) for X, Y in keys]
    return as_refs(picks[PatchLabel.cancer]), as_refs(picks[PatchLabel.normal])


def _samples(refs: List[PatchRef], slides: Mapping[str, SlideDescriptorSet]) -> List[PatchSample]:
    return [slides[ref.slide_id].sample(ref.X, ref.Y) for ref in refs]


def _check_labels(labels: PatchLabels, slide: SlideDescriptorSet, state: TrainState) -> None:
    for label in (PatchLabel.cancer, PatchLabel.normal):
        if not any(value == label for value in labels.values()):
            raise LabelError(
                f"étiquettes d'une seule classe: aucun patch '{label.value}'"
            )
        available = len(eligible_patches(labels, slide, state, label))
        if available < state.budget_per_class:
            raise LabelError(
                f"{available} patchs '{label.value}' éligibles pour un budget de {state.budget_per_class}"
            )


class Trainer:
    def __init__(
        self,
        params: Optional[ModelParams] = None,
        schedule: Optional[ScheduleConfig] = None,
        log_base: LogBase = "e",
        threads: int = 0,
        provenance: Optional[Dict[str, Any]] = None,
    ):
        self.params = params or ModelParams()
        self.schedule = schedule or ScheduleConfig.parse(DEFAULT_SCHEDULE)
        self.log_base = log_base
        self.threads = threads
        self.provenance = provenance or {}

    def new_state(self) -> TrainState:
        return TrainState(
            budget_per_class=self.schedule.budget_per_class,
            per_round_k=self.schedule.per_round_k,
            patch_skip_threshold=self.params.patch_skip_threshold,
        )

    def refit(self, state: TrainState, slides: Mapping[str, SlideDescriptorSet], round_index: int) -> EvidenceModel:
        try:
            return fit_model(
                _samples(state.selected_p, slides),
                _samples(state.selected_n, slides),
                self.params,
                log_base=self.log_base,
                threads=self.threads,
                provenance=self.provenance,
            )
        except EmptyModelError as e:
            raise EmptyModelError(e.detail, round_index=round_index) from e

    def _round(
        self,
        criterion: SelectionCriterion,
        state: TrainState,
        labels: PatchLabels,
        slide: SlideDescriptorSet,
    ) -> EvidenceModel:
        remaining_p, remaining_n = state.remaining()
        k = state.per_round_k
        added_p, added_n = select_patches(
            criterion, state, labels, slide, min(k, remaining_p), k_n=min(k, remaining_n),
        )
        state.selected_p.extend(added_p)
        state.selected_n.extend(added_n)

        index = len(state.rounds)
        model = self.refit(state, {slide.slide_id: slide}, index)
        state.round_scores.append(score_slide(model, slide, threads=self.threads))
        state.rounds.append(RoundRecord(
            index=index, criterion=criterion, slide_id=slide.slide_id,
            added_p=added_p, added_n=added_n, n_p=model.n_p, n_n=model.n_n, alpha=model.alpha,
        ))
        logger.info(
            f"🔁 Round {index} ({criterion.value}): +{len(added_p)}/+{len(added_n)} patchs, "
            f"total {len(state.selected_p)}/{len(state.selected_n)}, n_p={model.n_p}, n_n={model.n_n}"
        )
        return model

    def train(self, slide: SlideDescriptorSet, labels: PatchLabels) -> Tuple[EvidenceModel, TrainState]:
        """
        Programme par défaut : 3 x (high_density -> worst -> deterioration),
        puis worst seul jusqu'à épuisement du budget par classe.
        Chaque étape ajoute `per_round_k` patchs par classe, réajuste le modèle
        et recalcule la carte de scores de la lame.
        """
        state = self.new_state()
        _check_labels(labels, slide, state)
        model: Optional[EvidenceModel] = None

        def exhausted() -> bool:
            return state.remaining() == (0, 0)

        for step in self.schedule.steps:
            repeat = 0
            while not exhausted() and (step.repeat is None or repeat < step.repeat):
                for criterion in step.criteria:
                    if exhausted():
                        break
                    model = self._round(criterion, state, labels, slide)
                repeat += 1
            if exhausted():
                break

        if model is None:
            raise SelectionStateError("programme d'apprentissage sans aucun round")
        logger.info(f"✅ Apprentissage terminé: {len(state.selected_p)}+{len(state.selected_n)} patchs")
        return model, state

    def remedy_covariate_shift(
        self,
        model: EvidenceModel,
        state: TrainState,
        slides: Mapping[str, SlideDescriptorSet],
        target: SlideDescriptorSet,
        target_labels: PatchLabels,
        k: Optional[int] = None,
    ) -> Tuple[EvidenceModel, TrainState]:
        """
        Round no_information sur une lame touchée par un décalage de covariables

        Les patchs de la cible dont |score| est le plus proche de 0 sont ajoutés
        à I^p / I^n (au-delà du budget), puis le modèle est réajusté sur
        l'ensemble des lames.
        """
        k = k or state.per_round_k
        target_scores = score_slide(model, target, threads=self.threads)
        added_p, added_n = select_patches(
            SelectionCriterion.no_information, state, target_labels, target, k, scores=target_scores,
        )
        state.selected_p.extend(added_p)
        state.selected_n.extend(added_n)

        all_slides = dict(slides)
        all_slides[target.slide_id] = target
        index = len(state.rounds)
        refitted = self.refit(state, all_slides, index)
        state.rounds.append(RoundRecord(
            index=index, criterion=SelectionCriterion.no_information, slide_id=target.slide_id,
            added_p=added_p, added_n=added_n, n_p=refitted.n_p, n_n=refitted.n_n, alpha=refitted.alpha,
        ))
        logger.info(
            f"🩹 Round {index} (no_information sur {target.slide_id}): +{len(added_p)}/+{len(added_n)} patchs, "
            f"n_p={refitted.n_p}, n_n={refitted.n_n}"
        )
        return refitted, state
