import math

import numpy as np
import pytest
from PIL import Image

from core.exceptions import DescriptorValidationError, FormatError, InvalidArgumentError
from models.descriptors import DESCRIPTOR_MAX, DESCRIPTOR_SIZE, ExtractionParams
from services.features import build_slide_set, extract_descriptors, grid_dims, load_raster, patch_index


def per_pixel_descriptors(image, stride, cell):
    """Boucle pixel par pixel : gradient centré, 8 secteurs de 45°, 4x4 cellules, L2 puis x255"""
    img = image.astype(np.float64)
    height, width = img.shape

    def diff(line, i, n):
        if i == 0:
            return line[1] - line[0]
        if i == n - 1:
            return line[n - 1] - line[n - 2]
        return (line[i + 1] - line[i - 1]) / 2.0

    window = 4 * cell
    sector = 2.0 * math.pi / 8
    keypoints, rows = [], []
    for top in range(0, height - window + 1, stride):
        for left in range(0, width - window + 1, stride):
            hist = np.zeros(DESCRIPTOR_SIZE)
            for dy in range(window):
                for dx in range(window):
                    y, x = top + dy, left + dx
                    gx = diff(img[y, :], x, width)
                    gy = diff(img[:, x], y, height)
                    o = int(math.floor((math.atan2(gy, gx) % (2.0 * math.pi)) / sector)) % 8
                    hist[((dy // cell) * 4 + dx // cell) * 8 + o] += math.hypot(gx, gy)
            norm = math.sqrt(float(np.dot(hist, hist)))
            if norm == 0:
                continue
            keypoints.append((left + window // 2, top + window // 2))
            rows.append(np.minimum(hist / norm * DESCRIPTOR_MAX, DESCRIPTOR_MAX))
    return keypoints, np.array(rows).reshape(-1, DESCRIPTOR_SIZE)


class TestPatchGrid:
    @pytest.mark.parametrize("x, y, expected", [(0, 0, (0, 0)), (511, 511, (0, 0)), (512, 600, (1, 1))])
    def test_patch_index(self, x, y, expected):
        assert patch_index(x, y, 512) == expected

    def test_patch_index_rejects_negative_and_zero_size(self):
        with pytest.raises(InvalidArgumentError):
            patch_index(-1, 0, 512)
        with pytest.raises(InvalidArgumentError):
            patch_index(0, 0, 0)

    @pytest.mark.parametrize("w, h, expected", [
        (1024, 1536, (2, 3)),
        (1025, 512, (3, 1)),
        (97792, 221184, (191, 432)),
    ])
    def test_grid_dims(self, w, h, expected):
        assert grid_dims(w, h, 512) == expected


class TestBuildSlideSet:
    def test_canonical_order_is_raster_then_input(self):
        xs = [600, 10, 20, 700, 30]
        ys = [10, 600, 5, 10, 6]
        descriptors = np.arange(5)[:, None] * np.ones((1, DESCRIPTOR_SIZE))
        slide = build_slide_set("s", xs, ys, descriptors, patch_size_px=512)

        # (0,0) : lignes 2 et 4 ; (1,0) : lignes 0 et 3 ; (0,1) : ligne 1
        np.testing.assert_array_equal(slide.descriptors[:, 0], [2, 4, 0, 3, 1])
        assert slide.grid == (2, 2)
        assert slide.patch_counts() == {(0, 0): 2, (1, 0): 2, (0, 1): 1}
        assert slide.count(1, 1) == 0
        assert list(slide.patches()) == [(0, 0), (1, 0), (0, 1), (1, 1)]

    def test_integral_components_are_stored_as_uint8(self):
        slide = build_slide_set("s", [0], [0], np.full((1, DESCRIPTOR_SIZE), 7.0))
        assert slide.descriptors.dtype == np.uint8
        slide = build_slide_set("s", [0], [0], np.full((1, DESCRIPTOR_SIZE), 7.5))
        assert slide.descriptors.dtype == np.float64

    def test_point_outside_declared_slide(self):
        with pytest.raises(DescriptorValidationError):
            build_slide_set("s", [1024], [0], np.zeros((1, DESCRIPTOR_SIZE)), width_px=1024, height_px=512)

    def test_arrays_are_read_only(self):
        slide = build_slide_set("s", [0], [0], np.zeros((1, DESCRIPTOR_SIZE)))
        with pytest.raises(ValueError):
            slide.descriptors[0, 0] = 1


class TestExtractDescriptors:
    def test_constant_image_has_no_descriptor(self):
        slide = extract_descriptors(np.full((64, 64), 120, dtype=np.uint8))
        assert len(slide) == 0

    def test_vertical_step_edge_uses_horizontal_orientations_only(self):
        image = np.zeros((64, 64), dtype=np.uint8)
        image[:, 32:] = 255
        slide = extract_descriptors(image)

        assert len(slide) > 0
        by_orientation = slide.descriptors.astype(np.float64).reshape(len(slide), 16, 8)
        assert np.all(by_orientation[:, :, [1, 2, 3, 5, 6, 7]] == 0)
        assert np.all(by_orientation[:, :, [0, 4]].sum(axis=(1, 2)) > 0)

        keypoints, expected = per_pixel_descriptors(image, 8, 4)
        assert len(keypoints) == len(slide)
        np.testing.assert_allclose(slide.descriptors.astype(np.float64), expected, rtol=1e-9, atol=1e-9)

    @pytest.mark.parametrize("stride, cell", [(5, 3), (8, 4), (16, 4), (3, 2)])
    def test_matches_per_pixel_oracle(self, rng, stride, cell):
        image = rng.integers(0, 256, size=(37, 45), dtype=np.uint8)
        slide = extract_descriptors(image, ExtractionParams(stride_px=stride, cell_px=cell))
        keypoints, expected = per_pixel_descriptors(image, stride, cell)

        assert list(zip(slide.xs.tolist(), slide.ys.tolist())) == keypoints
        np.testing.assert_allclose(slide.descriptors.astype(np.float64), expected, rtol=1e-9, atol=1e-9)

    def test_descriptor_invariants(self, rng):
        image = rng.integers(0, 256, size=(80, 96), dtype=np.uint8)
        slide = extract_descriptors(image, ExtractionParams(stride_px=4))
        d = slide.descriptors.astype(np.float64)
        assert d.shape[1] == DESCRIPTOR_SIZE
        assert d.min() >= 0 and d.max() <= DESCRIPTOR_MAX
        np.testing.assert_allclose(np.linalg.norm(d, axis=1), DESCRIPTOR_MAX, rtol=1e-5)

    def test_deterministic(self, rng):
        image = rng.integers(0, 256, size=(64, 64), dtype=np.uint8)
        first = extract_descriptors(image)
        second = extract_descriptors(image.copy())
        assert first.descriptors.tobytes() == second.descriptors.tobytes()
        np.testing.assert_array_equal(first.xs, second.xs)

    def test_keypoints_sit_at_window_centres(self):
        image = np.zeros((32, 32), dtype=np.uint8)
        image[:, 16:] = 255
        slide = extract_descriptors(image, ExtractionParams(stride_px=8, cell_px=4))
        assert set(slide.ys.tolist()) <= {8, 16, 24}
        assert all((x - 8) % 8 == 0 for x in slide.xs.tolist())

    def test_rgb_image_is_converted(self, rng):
        rgb = rng.integers(0, 256, size=(40, 40, 3), dtype=np.uint8)
        slide = extract_descriptors(Image.fromarray(rgb, mode="RGB"))
        assert len(slide) > 0

    def test_unsupported_raster(self):
        with pytest.raises(FormatError):
            extract_descriptors(np.zeros((8, 8), dtype=np.float64))


class TestLoadRaster:
    def test_png_is_read_as_grayscale(self, tmp_path, rng):
        path = tmp_path / "lame.png"
        Image.fromarray(rng.integers(0, 256, size=(20, 30, 3), dtype=np.uint8), mode="RGB").save(path)
        gray = load_raster(str(path))
        assert gray.shape == (20, 30)
        assert gray.dtype == np.uint8

    def test_not_an_image(self, tmp_path):
        path = tmp_path / "faux.png"
        path.write_text("pas une image")
        with pytest.raises(FormatError):
            load_raster(str(path))
