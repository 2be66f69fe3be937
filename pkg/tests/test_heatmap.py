import numpy as np
import pytest
from PIL import Image

from core.exceptions import InvalidArgumentError, StorageError
from models.scores import Classification
from services.heatmap import GRAY, WHITE, heatmap_image, render_heatmap, score_scale
from services.scoring import classify


def pixels(image):
    return np.asarray(image)


class TestHeatmap:
    def test_all_skipped_map_is_uniform_gray(self, make_map):
        image = heatmap_image(make_map([None, None, None]), block_px=2)
        assert image.size == (6, 2)
        assert np.all(pixels(image) == GRAY)

    def test_positive_patch_is_blue(self, make_map):
        image = heatmap_image(make_map([0.7]), block_px=4)
        assert np.all(pixels(image) == (0, 0, 255))

    def test_negative_patch_is_red_and_zero_is_white(self, make_map):
        image = heatmap_image(make_map([-2.0, 0.0, 2.0]), block_px=1)
        assert tuple(pixels(image)[0, 0]) == (255, 0, 0)
        assert tuple(pixels(image)[0, 1]) == WHITE
        assert tuple(pixels(image)[0, 2]) == (0, 0, 255)

    def test_intensity_follows_the_95th_percentile(self, make_map):
        scores = [float(v) for v in range(1, 21)]
        score_map = make_map(scores)
        scale = score_scale(score_map)
        assert scale == pytest.approx(np.percentile(scores, 95))
        row = pixels(heatmap_image(score_map, block_px=1))[0]
        # Sous l'échelle : bleu partiel ; au-delà : saturé
        assert 0 < row[0][0] < 255
        assert tuple(row[-1]) == (0, 0, 255)

    def test_small_scores_are_never_white(self, make_map):
        row = pixels(heatmap_image(make_map([1e-9, 100.0]), block_px=1))[0]
        assert tuple(row[0]) != WHITE
        assert row[0][2] == 255

    def test_color_sign_matches_classify(self, rng, make_map):
        scores = list(rng.normal(size=60)) + [0.0, None]
        score_map = make_map(scores)
        row = pixels(heatmap_image(score_map, block_px=1))[0]
        for cell, color in zip(score_map.cells, row):
            if cell.skipped:
                continue
            blue = color[2] == 255 and color[0] < 255
            assert blue == (classify(cell.score) == Classification.cancer)

    def test_empty_map(self, make_map):
        with pytest.raises(InvalidArgumentError):
            heatmap_image(make_map([]))


class TestRenderHeatmap:
    def test_binary_ppm_written_deterministically(self, make_map, tmp_path):
        score_map = make_map([1.0, -0.5, None, 0.0])
        first, second = tmp_path / "a.ppm", tmp_path / "b.ppm"
        render_heatmap(score_map, first, block_px=3)
        render_heatmap(score_map, second, block_px=3)

        data = first.read_bytes()
        assert data.startswith(b"P6")
        assert data == second.read_bytes()
        with Image.open(first) as image:
            assert image.size == (12, 3)

    def test_unwritable_path(self, make_map, tmp_path):
        with pytest.raises(StorageError):
            render_heatmap(make_map([1.0]), tmp_path / "absent" / "carte.ppm")
