import numpy as np
import pytest

from core.exceptions import EmptyModelError, SpecError
from models.evaluation import SyntheticSpec
from models.evidence import ModelParams, Polarity
from models.training import PatchLabel
from services.evidence import fit_model
from services.synthetic import allocate, patch_labels, sample_centers, synth_slide


def balanced_training_sets(slide, labels, per_class):
    """Autant de patchs cancer que normaux, en ordre raster"""
    keys = sorted(labels, key=lambda k: (k[1], k[0]))
    cancer = [slide.sample(*k) for k in keys if labels[k] == PatchLabel.cancer][:per_class]
    normal = [slide.sample(*k) for k in keys if labels[k] == PatchLabel.normal][:per_class]
    return cancer, normal


class TestSyntheticSlide:
    def test_same_seed_same_slide(self, small_spec):
        first, labels_a = synth_slide(small_spec)
        second, labels_b = synth_slide(small_spec)
        assert first.descriptors.tobytes() == second.descriptors.tobytes()
        np.testing.assert_array_equal(first.xs, second.xs)
        assert labels_a == labels_b

    def test_other_seed_same_centres(self, small_spec):
        other = small_spec.model_copy(update={"seed": 2})
        first, _ = synth_slide(small_spec)
        second, _ = synth_slide(other)
        assert first.descriptors.tobytes() != second.descriptors.tobytes()
        np.testing.assert_array_equal(sample_centers(small_spec), sample_centers(other))

    def test_first_centres_only_depend_on_center_seed(self):
        few = sample_centers(SyntheticSpec(n_clusters_p=2, n_clusters_n=2, center_seed=5))
        more = sample_centers(SyntheticSpec(n_clusters_p=3, n_clusters_n=3, center_seed=5))
        np.testing.assert_array_equal(more[:4], few)

    def test_grid_and_descriptor_counts(self, small_slide, small_spec):
        slide, labels = small_slide
        assert slide.grid == (small_spec.cols, small_spec.rows)
        assert len(labels) == small_spec.cols * small_spec.rows
        counts = slide.patch_counts()
        assert all(small_spec.descriptors_min <= n <= small_spec.descriptors_max for n in counts.values())
        assert slide.descriptors.dtype == np.uint8

    def test_disc_region_with_excluded_boundary(self, small_spec):
        labels = patch_labels(small_spec)
        assert labels[(5, 5)] == PatchLabel.cancer
        assert labels[(0, 0)] == PatchLabel.normal
        assert PatchLabel.excluded in labels.values()
        sharp = patch_labels(small_spec.model_copy(update={"boundary_excluded": False}))
        assert PatchLabel.excluded not in sharp.values()

    def test_background_patches(self, small_spec):
        spec = small_spec.model_copy(update={"background_fraction": 0.3, "background_max": 20})
        slide, _ = synth_slide(spec)
        assert any(n <= 20 for n in slide.patch_counts().values()) or len(slide.patch_counts()) < 100

    @pytest.mark.parametrize("separation", [400.0, 3000.0])
    def test_infeasible_separation(self, separation):
        with pytest.raises(SpecError):
            sample_centers(SyntheticSpec(cluster_separation=separation))

    def test_allocation_is_exact(self):
        counts = allocate(400, np.array([0.1, 0.3, 0.7, 0.9]))
        np.testing.assert_array_equal(counts, [20, 60, 140, 180])
        assert allocate(7, np.array([1.0, 1.0, 1.0])).sum() == 7
        assert allocate(5, np.zeros(3)).sum() == 0


class TestPlantedRho:
    def test_fitted_rho_recovers_the_plant(self):
        planted = [0.1, 0.3, 0.7, 0.9]
        spec = SyntheticSpec(
            n_clusters_p=2, n_clusters_n=2, planted_rho=planted, cols=10, rows=10,
            descriptors_min=400, descriptors_max=400, seed=3,
        )
        slide, labels = synth_slide(spec)
        cancer, normal = balanced_training_sets(slide, labels, 10)
        model = fit_model(cancer, normal, ModelParams(patch_skip_threshold=0))

        centers = sample_centers(spec)
        assert model.n_features == 4
        for feature in model.features:
            cluster = int(np.argmin(np.linalg.norm(centers - np.array(feature.leader), axis=1)))
            assert feature.count_p + feature.count_n >= 200
            assert feature.rho_p == pytest.approx(planted[cluster], abs=0.05)
            expected = Polarity.positive if planted[cluster] > 0.5 else Polarity.negative
            assert feature.polarity == expected

    def test_unbalanced_plant_is_recovered(self):
        # Somme des rho (1.9) différente de la somme des 1 - rho (1.1)
        planted = [0.9, 0.7, 0.3]
        spec = SyntheticSpec(
            n_clusters_p=2, n_clusters_n=1, planted_rho=planted, cols=10, rows=10,
            descriptors_min=400, descriptors_max=400, seed=4,
        )
        slide, labels = synth_slide(spec)
        cancer, normal = balanced_training_sets(slide, labels, 10)
        model = fit_model(cancer, normal, ModelParams(patch_skip_threshold=0))

        centers = sample_centers(spec)
        assert (model.n_p, model.n_n) == (2, 1)
        for feature in model.features:
            cluster = int(np.argmin(np.linalg.norm(centers - np.array(feature.leader), axis=1)))
            assert feature.rho_p == pytest.approx(planted[cluster], abs=0.05)

    def test_lighter_class_keeps_the_drawn_count(self):
        spec = SyntheticSpec(
            n_clusters_p=2, n_clusters_n=1, planted_rho=[0.9, 0.7, 0.3],
            descriptors_min=400, descriptors_max=400, boundary_excluded=False,
        )
        slide, labels = synth_slide(spec)
        counts = slide.patch_counts()
        normal = {counts[k] for k, v in labels.items() if v == PatchLabel.normal}
        cancer = {counts[k] for k, v in labels.items() if v == PatchLabel.cancer}
        assert normal == {400}
        assert cancer == {round(400 * 1.9 / 1.1)}

    def test_cancer_only_clusters(self):
        spec = SyntheticSpec(n_clusters_p=2, n_clusters_n=0, planted_rho=[1.0, 1.0], descriptors_min=300, descriptors_max=300)
        slide, labels = synth_slide(spec)
        cancer, normal = balanced_training_sets(slide, labels, 4)
        assert all(len(sample.descriptors) == 0 for sample in normal)

        model = fit_model(cancer, normal, ModelParams(patch_skip_threshold=0))
        assert model.n_p == 2 and model.n_n == 0
        assert all(f.rho_p == 1.0 for f in model.positives)

    def test_neutral_clusters_give_no_evidence(self):
        spec = SyntheticSpec(planted_rho=[0.5] * 6, descriptors_min=300, descriptors_max=300)
        slide, labels = synth_slide(spec)
        cancer, normal = balanced_training_sets(slide, labels, 4)
        with pytest.raises(EmptyModelError):
            fit_model(cancer, normal, ModelParams(patch_skip_threshold=0))
