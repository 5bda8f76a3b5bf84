import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from railportal.imgcore import (
    BBox,
    BinaryImage,
    GrayImage,
    ImageFormatError,
    canny_edges,
    connected_components,
    dilate_disk,
    disk_offsets,
    fill_holes,
    otsu_threshold,
    read_binary_pgm,
    read_pgm,
    read_ppm,
    write_binary_pgm,
    write_pgm,
    write_ppm,
)

from oracles import (
    disk_pixels,
    fill_holes_reference,
    flood_fill_components,
    otsu_exhaustive,
)


def gray(a) -> GrayImage:
    return GrayImage(np.asarray(a, dtype=np.uint8))


def binary(a) -> BinaryImage:
    return BinaryImage(np.asarray(a, dtype=bool))


small_masks = arrays(bool, (24, 31), elements=st.booleans())


class TestOtsu:
    def test_constant_image_degenerate(self):
        res = otsu_threshold(gray(np.full((16, 16), 117)))
        assert res.threshold == 117
        assert res.degenerate

    def test_bimodal_halves_separate(self):
        img = np.full((10, 20), 10, dtype=np.uint8)
        img[:, 10:] = 200
        res = otsu_threshold(gray(img))
        assert not res.degenerate
        left = img <= res.threshold
        assert left[:, :10].all() and not left[:, 10:].any()

    def test_matches_exhaustive_oracle(self):
        rng = np.random.default_rng(1234)
        for _ in range(100):
            img = rng.integers(0, 256, size=(32, 32), dtype=np.uint8)
            assert otsu_threshold(gray(img)).threshold == otsu_exhaustive(img)

    def test_tie_breaks_to_smallest(self):
        # Two-valued histogram: every t in [10, 199] yields the same split.
        img = np.full((8, 8), 200, dtype=np.uint8)
        img[:4] = 10
        assert otsu_threshold(gray(img)).threshold == 10


class TestCanny:
    def test_constant_image_no_edges(self):
        edges = canny_edges(gray(np.full((32, 32), 90)), 50, 25)
        assert not edges.mask.any()

    def test_vertical_step_single_thin_chain(self):
        img = np.zeros((24, 40), dtype=np.uint8)
        img[:, 20:] = 255
        edges = canny_edges(gray(img), 100, 50)
        cols = np.nonzero(edges.mask.any(axis=0))[0]
        assert len(cols) == 1 and cols[0] in (19, 20)
        # one edge pixel per row: thin across the gradient
        assert (edges.mask.sum(axis=1) == 1).all()

    def test_square_contour_closes_to_area(self):
        img = np.full((60, 60), 30, dtype=np.uint8)
        img[20:40, 20:40] = 200
        t_high = otsu_threshold(gray(img)).threshold
        edges = canny_edges(gray(img), t_high, 0.5 * t_high)
        filled = fill_holes(edges)
        area = int(filled.mask.sum())
        assert abs(area - 400) <= 40

    def test_inversion_invariance_on_step(self):
        img = np.zeros((24, 40), dtype=np.uint8)
        img[:, 20:] = 255
        a = canny_edges(gray(img), 100, 50)
        b = canny_edges(gray(255 - img), 100, 50)
        assert np.array_equal(a.mask, b.mask)

    def test_rejects_bad_thresholds(self):
        with pytest.raises(ValueError):
            canny_edges(gray(np.zeros((8, 8))), 10, 20)


class TestDilateDisk:
    def test_zero_radius_identity(self):
        rng = np.random.default_rng(7)
        m = rng.random((15, 17)) < 0.3
        out = dilate_disk(binary(m), 0)
        assert np.array_equal(out.mask, m)

    def test_single_pixel_radius2_disk(self):
        m = np.zeros((21, 21), dtype=bool)
        m[10, 10] = True
        out = dilate_disk(binary(m), 2)
        expect = disk_pixels(10, 10, 2)
        assert len(expect) == 13
        got = {(x, y) for y, x in zip(*np.nonzero(out.mask))}
        assert got == expect

    def test_extensive_and_monotone(self):
        rng = np.random.default_rng(11)
        m = rng.random((30, 30)) < 0.1
        d2 = dilate_disk(binary(m), 2)
        d3 = dilate_disk(binary(m), 3)
        assert (d2.mask | m).sum() == d2.mask.sum()          # output superset of input
        assert (d3.mask | d2.mask).sum() == d3.mask.sum()    # monotone in radius

    def test_commutes_with_translation(self):
        rng = np.random.default_rng(13)
        m = np.zeros((40, 40), dtype=bool)
        m[10:25, 10:25] = rng.random((15, 15)) < 0.3
        shifted = np.roll(np.roll(m, 4, axis=0), 5, axis=1)
        a = np.roll(np.roll(dilate_disk(binary(m), 3).mask, 4, axis=0), 5, axis=1)
        b = dilate_disk(binary(shifted), 3).mask
        assert np.array_equal(a, b)

    def test_clipped_at_border(self):
        m = np.zeros((5, 5), dtype=bool)
        m[0, 0] = True
        out = dilate_disk(binary(m), 2)
        assert out.mask[0, 2] and out.mask[2, 0] and not out.mask[2, 2]

    def test_disk_offsets_radius0(self):
        assert disk_offsets(0).tolist() == [[0, 0]]


class TestFillHoles:
    def test_ring_becomes_disk(self):
        m = np.zeros((20, 20), dtype=bool)
        m[5:15, 5:15] = True
        m[7:13, 7:13] = False
        out = fill_holes(binary(m))
        assert out.mask[5:15, 5:15].all()
        assert out.mask.sum() == 100

    def test_solid_blob_unchanged(self):
        m = np.zeros((12, 12), dtype=bool)
        m[3:8, 3:8] = True
        out = fill_holes(binary(m))
        assert np.array_equal(out.mask, m)

    @settings(max_examples=40, deadline=None)
    @given(small_masks)
    def test_matches_border_flood_oracle(self, m):
        out = fill_holes(binary(m))
        assert np.array_equal(out.mask, fill_holes_reference(m))

    @settings(max_examples=25, deadline=None)
    @given(small_masks)
    def test_idempotent(self, m):
        once = fill_holes(binary(m))
        twice = fill_holes(once)
        assert np.array_equal(once.mask, twice.mask)


class TestConnectedComponents:
    def test_empty_mask(self):
        cc = connected_components(binary(np.zeros((9, 9), dtype=bool)))
        assert cc.count == 0
        assert not cc.labels.any()

    def test_two_disjoint_squares(self):
        m = np.zeros((12, 20), dtype=bool)
        m[2:5, 2:5] = True
        m[6:9, 12:15] = True
        cc = connected_components(binary(m))
        assert cc.count == 2
        assert cc.boxes[0] == BBox(2, 2, 3, 3)
        assert cc.boxes[1] == BBox(12, 6, 3, 3)
        assert cc.areas.tolist() == [9, 9]

    def test_matches_flood_fill_oracle(self):
        rng = np.random.default_rng(42)
        for _ in range(30):
            m = rng.random((64, 64)) < 0.35
            cc = connected_components(binary(m))
            assert np.array_equal(cc.labels, flood_fill_components(m))

    def test_areas_sum_to_foreground(self):
        rng = np.random.default_rng(5)
        m = rng.random((50, 40)) < 0.4
        cc = connected_components(binary(m))
        assert cc.areas.sum() == m.sum()

    def test_boxes_tight(self):
        rng = np.random.default_rng(6)
        m = rng.random((40, 40)) < 0.2
        cc = connected_components(binary(m))
        for idx, box in enumerate(cc.boxes, start=1):
            sub = cc.labels[box.y:box.y2, box.x:box.x2] == idx
            assert sub.any(axis=0).all() and sub.any(axis=1).all()

    def test_diagonal_pixels_are_connected(self):
        m = np.zeros((4, 4), dtype=bool)
        m[0, 0] = m[1, 1] = True
        assert connected_components(binary(m)).count == 1


class TestRasterIO:
    def test_pgm_round_trip_bit_exact(self, tmp_path):
        rng = np.random.default_rng(3)
        img = gray(rng.integers(0, 256, size=(33, 47), dtype=np.uint8))
        p = tmp_path / "x.pgm"
        write_pgm(img, p)
        back = read_pgm(p)
        assert np.array_equal(back.data, img.data)

    def test_binary_pgm_round_trip(self, tmp_path):
        rng = np.random.default_rng(4)
        img = binary(rng.random((21, 14)) < 0.5)
        p = tmp_path / "b.pgm"
        write_binary_pgm(img, p)
        back = read_binary_pgm(p)
        assert np.array_equal(back.mask, img.mask)

    def test_binary_pgm_rejects_gray_values(self, tmp_path):
        p = tmp_path / "g.pgm"
        write_pgm(gray(np.full((4, 4), 128)), p)
        with pytest.raises(ImageFormatError):
            read_binary_pgm(p)

    def test_pgm_header_with_comment(self, tmp_path):
        p = tmp_path / "c.pgm"
        p.write_bytes(b"P5\n# a comment\n3 2\n255\n" + bytes(6))
        img = read_pgm(p)
        assert (img.width, img.height) == (3, 2)

    def test_ppm_round_trip(self, tmp_path):
        rng = np.random.default_rng(9)
        rgb = rng.integers(0, 256, size=(11, 13, 3), dtype=np.uint8)
        p = tmp_path / "x.ppm"
        write_ppm(rgb, p)
        assert np.array_equal(read_ppm(p), rgb)

    def test_rejects_truncated(self, tmp_path):
        p = tmp_path / "t.pgm"
        p.write_bytes(b"P5\n10 10\n255\n" + bytes(5))
        with pytest.raises(ImageFormatError):
            read_pgm(p)


class TestTypes:
    def test_gray_rejects_bad_shape(self):
        with pytest.raises(ImageFormatError):
            GrayImage(np.zeros(5, dtype=np.uint8))

    def test_bbox_helpers(self):
        b = BBox(2, 3, 4, 5)
        assert b.bottom_right == (6, 8)
        assert b.area == 20
        assert b.contains_box(BBox(3, 4, 2, 2))
        assert not b.contains_box(BBox(3, 4, 9, 2))
        assert BBox(0, 0, 2, 2).iou(BBox(1, 1, 2, 2)) == pytest.approx(1 / 7)

    def test_bbox_rejects_degenerate(self):
        with pytest.raises(ValueError):
            BBox(0, 0, 0, 1)
