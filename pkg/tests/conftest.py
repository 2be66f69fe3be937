import numpy as np
import pytest

from models.descriptors import DESCRIPTOR_SIZE, PatchRef, PatchSample
from models.evaluation import SyntheticSpec
from models.evidence import EvidenceFeature, ModelParams, Polarity
from models.scores import ScoreCell, ScoreMap
from models.training import PatchLabel
from services.evidence import classification_information
from services.synthetic import synth_slide


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def small_params():
    """Seuil d'évaluation abaissé pour des lames de ~300 descripteurs par patch"""
    return ModelParams(patch_skip_threshold=200)


@pytest.fixture
def small_spec():
    return SyntheticSpec(cols=10, rows=10, descriptors_min=300, descriptors_max=320, seed=1, slide_id="lame_a")


@pytest.fixture
def small_slide(small_spec):
    return synth_slide(small_spec)


@pytest.fixture
def make_sample():
    def _make(descriptors, X=0, Y=0, slide_id="s"):
        array = np.asarray(descriptors, dtype=np.float64).reshape(-1, DESCRIPTOR_SIZE)
        return PatchSample(PatchRef(slide_id=slide_id, X=X, Y=Y), array)
    return _make


@pytest.fixture
def make_feature():
    def _make(leader, count_p, count_n):
        rho = count_p / (count_p + count_n)
        return EvidenceFeature(
            leader=[float(v) for v in leader],
            count_p=count_p,
            count_n=count_n,
            rho_p=rho,
            cic=classification_information(rho),
            polarity=Polarity.positive if rho > 0.5 else Polarity.negative,
        )
    return _make


@pytest.fixture
def make_map():
    """Carte d'une ligne de patchs ; None = patch ignoré"""
    def _make(scores, slide_id="s"):
        cells = []
        for X, score in enumerate(scores):
            if score is None:
                cells.append(ScoreCell(X=X, Y=0, n_descriptors=0, skipped=True))
            else:
                cells.append(ScoreCell(X=X, Y=0, n_descriptors=10, skipped=False, score=float(score)))
        return ScoreMap(slide_id=slide_id, cols=len(scores), rows=1, cells=cells)
    return _make


@pytest.fixture
def make_labels():
    def _make(names):
        return {(X, 0): PatchLabel(name) for X, name in enumerate(names)}
    return _make


def point(*pairs):
    """Descripteur nul sauf les composantes données : point((0, 200), (1, 200))"""
    d = np.zeros(DESCRIPTOR_SIZE)
    for index, value in pairs:
        d[index] = value
    return d
