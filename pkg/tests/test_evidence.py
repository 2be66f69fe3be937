import math

import numpy as np
import pytest

from core.exceptions import EmptyModelError, InvalidArgumentError, UndefinedProbabilityError
from models.descriptors import DESCRIPTOR_SIZE
from models.evidence import EvidenceModel, MatchParams, ModelParams, Polarity
from services.evidence import (
    accept_evidence,
    assign_to_codebook,
    build_codebook,
    classification_information,
    count_occurrences,
    distance,
    estimate_rho,
    fit_model,
    kl_divergence,
    matches,
    rank_features,
)
from tests.conftest import point

PARAMS = MatchParams()


def cluster(rng, center, n, spread=20):
    return np.clip(center + rng.uniform(-spread, spread, size=(n, DESCRIPTOR_SIZE)), 0, 255)


class TestInformationMeasures:
    """Identités des mesures d'information"""

    def test_identities_on_random_rho(self, rng):
        rho = rng.uniform(1e-9, 1 - 1e-9, size=10_000)
        c = classification_information(rho)
        d = kl_divergence(rho)
        np.testing.assert_allclose(d + c, 2 * rho * np.log(2 * rho), rtol=0, atol=1e-12)
        np.testing.assert_allclose(c + classification_information(1 - rho), 0.0, rtol=0, atol=1e-12)

    def test_neutral_and_boundaries(self):
        assert classification_information(0.5) == 0.0
        assert kl_divergence(0.5) == 0.0
        assert classification_information(1.0) == pytest.approx(math.log(2), abs=1e-12)
        assert classification_information(0.0) == pytest.approx(-math.log(2), abs=1e-12)

    def test_reference_values(self):
        assert classification_information(0.8) == pytest.approx(0.559261, abs=1e-6)
        assert kl_divergence(0.8) == pytest.approx(0.192745, abs=1e-6)

    def test_base_two(self):
        assert classification_information(1.0, "2") == pytest.approx(1.0, abs=1e-12)
        assert kl_divergence(0.8, "2") == pytest.approx(0.192745 / math.log(2), abs=1e-6)

    def test_sign_follows_rho(self, rng):
        rho = rng.uniform(0, 1, size=1000)
        c = classification_information(rho)
        assert np.all(np.sign(c) == np.sign(rho - 0.5))

    @pytest.mark.parametrize("rho", [-0.1, 1.5, float("nan")])
    def test_out_of_range(self, rho):
        with pytest.raises(InvalidArgumentError):
            classification_information(rho)
        with pytest.raises(InvalidArgumentError):
            kl_divergence(rho)


class TestMatching:
    def test_distance(self):
        d = point((3, 40))
        assert distance(d, d) == 0
        assert distance(np.zeros(DESCRIPTOR_SIZE), point((0, 325))) == 325

    def test_threshold_is_strict(self):
        zero = np.zeros(DESCRIPTOR_SIZE)
        assert matches(zero, zero, PARAMS)
        assert not matches(zero, point((0, 325)), PARAMS)
        assert matches(zero, point((0, 324.9)), PARAMS)

    def test_codebook_examples(self):
        assert build_codebook(np.empty((0, DESCRIPTOR_SIZE)), PARAMS).shape == (0, DESCRIPTOR_SIZE)
        d = point((5, 100))
        assert build_codebook(np.vstack([d, d]), PARAMS).shape[0] == 1
        # Deux composantes à 200 par point : distances deux à deux de 400
        spread = np.vstack([point((2 * i, 200), (2 * i + 1, 200)) for i in range(3)])
        leaders = build_codebook(spread, PARAMS)
        np.testing.assert_array_equal(leaders, spread)

    def test_codebook_matches_sequential_scan(self, rng):
        descriptors = rng.integers(0, 256, size=(300, DESCRIPTOR_SIZE)).astype(np.float64) * 0.3
        params = MatchParams(match_threshold=120.0)
        expected = []
        for d in descriptors:
            if not any(np.sum((d - l) ** 2) < 120.0 ** 2 for l in expected):
                expected.append(d)
        np.testing.assert_array_equal(build_codebook(descriptors, params), np.array(expected))

    def test_count_occurrences(self, rng):
        leader = point((0, 100))
        codebook = np.vstack([leader, point((0, 200))])
        assert count_occurrences(leader, np.empty((0, DESCRIPTOR_SIZE)), codebook, PARAMS) == 0
        records = np.vstack([point((0, 100), (1, 5)), point((0, 90)), point((0, 110), (2, 3))])
        assert count_occurrences(leader, records, codebook, PARAMS) == 3

    def test_equidistant_record_counts_for_lowest_leader(self):
        first, second = np.zeros(DESCRIPTOR_SIZE), point((0, 200))
        codebook = np.vstack([first, second])
        record = point((0, 100))[None, :]
        assert count_occurrences(first, record, codebook, PARAMS) == 1
        assert count_occurrences(second, record, codebook, PARAMS) == 0
        np.testing.assert_array_equal(assign_to_codebook(record, codebook, 325.0), [0])

    def test_leader_not_in_codebook(self):
        with pytest.raises(InvalidArgumentError):
            count_occurrences(point((0, 1)), np.zeros((1, DESCRIPTOR_SIZE)), np.zeros((1, DESCRIPTOR_SIZE)), PARAMS)

    def test_unmatched_record(self):
        assignment = assign_to_codebook(point((0, 250), (1, 250))[None, :], np.zeros((1, DESCRIPTOR_SIZE)), 325.0)
        np.testing.assert_array_equal(assignment, [-1])


class TestProbabilityAndAcceptance:
    @pytest.mark.parametrize("counts, expected", [((10, 0), 1.0), ((5, 5), 0.5), ((6, 3), 2 / 3)])
    def test_estimate_rho(self, counts, expected):
        assert estimate_rho(*counts) == pytest.approx(expected)

    def test_undefined_rho(self):
        with pytest.raises(UndefinedProbabilityError):
            estimate_rho(0, 0)

    def test_acceptance_examples(self):
        assert accept_evidence(0.7, 7, 3, PARAMS) == Polarity.positive
        assert accept_evidence(0.3, 3, 7, PARAMS) == Polarity.negative
        assert accept_evidence(0.6, 6, 4, PARAMS) is None
        assert accept_evidence(2 / 3, 6, 3, PARAMS) is None

    def test_exact_ratio_is_rejected(self):
        assert accept_evidence(2 / 3, 20, 10, PARAMS) is None


class TestFitModel:
    @pytest.fixture
    def two_clusters(self, rng, make_sample):
        a = np.full(DESCRIPTOR_SIZE, 40.0)
        b = np.full(DESCRIPTOR_SIZE, 200.0)
        positives = [make_sample(cluster(rng, a, 30), X=i) for i in range(20)]
        negatives = [make_sample(cluster(rng, b, 30), X=i, Y=1) for i in range(20)]
        return a, b, positives, negatives

    def test_planted_clusters_give_their_polarity(self, two_clusters):
        a, b, positives, negatives = two_clusters
        model = fit_model(positives, negatives)
        assert model.n_p >= 1 and model.n_n >= 1
        for f in model.positives:
            assert np.linalg.norm(np.array(f.leader) - a) < 325
        for f in model.negatives:
            assert np.linalg.norm(np.array(f.leader) - b) < 325
        assert model.alpha == pytest.approx(model.n_p / model.n_features)

    def test_same_patches_on_both_sides(self, two_clusters):
        _, _, positives, _ = two_clusters
        with pytest.raises(EmptyModelError):
            fit_model(positives, positives)

    def test_feature_only_in_cancer(self, make_sample):
        a, b = point((0, 50)), point((0, 250), (1, 250), (2, 250))
        model = fit_model([make_sample(np.tile(a, (30, 1)))], [make_sample(np.tile(b, (30, 1)), X=1)])
        feature = model.positives[0]
        assert (feature.count_p, feature.count_n) == (30, 0)
        assert feature.rho_p == 1.0
        assert feature.cic == pytest.approx(math.log(2), abs=1e-12)
        assert model.negatives[0].rho_p == 0.0

    def test_min_occurrences(self, make_sample):
        a, b = point((0, 50)), point((0, 250), (1, 250), (2, 250))
        with pytest.raises(EmptyModelError):
            fit_model([make_sample(np.tile(a, (9, 1)))], [make_sample(np.tile(b, (9, 1)), X=1)])

    def test_independent_of_threads_and_patch_order(self, two_clusters):
        _, _, positives, negatives = two_clusters
        single = fit_model(positives, negatives, threads=1)
        pooled = fit_model(list(reversed(positives)), negatives[::-1], threads=4)
        assert single.model_dump() == pooled.model_dump()

    def test_records_training_patches(self, two_clusters):
        _, _, positives, negatives = two_clusters
        model = fit_model(positives, negatives, provenance={"command": "test"})
        assert model.provenance["slides"] == ["s"]
        assert len(model.provenance["patches_p"]) == 20
        assert model.provenance["command"] == "test"
        assert isinstance(model.params, ModelParams)

    def test_log_base_is_recorded(self, two_clusters):
        _, _, positives, negatives = two_clusters
        model = fit_model(positives, negatives, log_base="2")
        assert model.log_base == "2"
        assert all(f.cic <= 1.0 for f in model.positives)


class TestRankFeatures:
    def test_orders_by_usefulness(self, make_feature):
        strong = make_feature(point((0, 10)), 30, 1)
        weak = make_feature(point((0, 200)), 20, 8)
        negative = make_feature(point((1, 100)), 2, 25)
        model = EvidenceModel.from_features([weak, strong], [negative])

        by_cic = rank_features(model, by="cic")
        assert by_cic[0] == strong
        assert [abs(f.cic) for f in by_cic] == sorted((abs(f.cic) for f in by_cic), reverse=True)
        assert rank_features(model, by="kl")[-1] == weak

    def test_unknown_criterion(self, make_feature):
        model = EvidenceModel.from_features([make_feature(point((0, 10)), 30, 1)], [])
        with pytest.raises(InvalidArgumentError):
            rank_features(model, by="taille")
