import filecmp
import json
from pathlib import Path

import numpy as np
import pytest

from railportal.imgcore import BinaryImage, connected_components
from railportal.synth import (
    FONT_5X7,
    HotspotSpec,
    PantographSpec,
    ScenarioError,
    ScenarioSpec,
    WagonSpec,
    corpus_spec,
    frontal_frame_count,
    render_frontal_frame,
    render_glyph,
    render_roof_mosaic,
    render_side_mosaic,
    render_thermal_chain,
    write_scenario,
)


def small_spec(seed=1):
    return ScenarioSpec(seed=seed, side_width=2048, side_height=512,
                        roof_width=1024, roof_height=384, distractors=5,
                        duration_s=0.5, frontal_rate_hz=10.0)


class TestSpecValidation:
    def test_id_must_be_12_chars(self):
        with pytest.raises(ScenarioError):
            ScenarioSpec(wagons=(WagonSpec(id_string="123"),))

    def test_id_must_be_renderable(self):
        with pytest.raises(ScenarioError):
            ScenarioSpec(wagons=(WagonSpec(id_string="12345678901X"),))

    def test_hotspot_range_validated(self):
        with pytest.raises(ScenarioError):
            ScenarioSpec(hotspots=(HotspotSpec(u=0.5, v=0.5, temp_c=900.0),))

    def test_duration_positive(self):
        with pytest.raises(ScenarioError):
            ScenarioSpec(duration_s=0.0)


class TestFont:
    def test_every_digit_is_single_component(self):
        # one blob per glyph keeps truth boxes and detections aligned
        for ch in FONT_5X7:
            g = render_glyph(ch, 4)
            cc = connected_components(BinaryImage(g))
            assert cc.count == 1, f"glyph {ch} fragments into {cc.count}"

    def test_scaling(self):
        g = render_glyph("8", 3)
        assert g.shape == (21, 15)


class TestSideMosaic:
    def test_twelve_glyph_truth(self):
        img, truth = render_side_mosaic(small_spec())
        assert len(truth.glyph_boxes) == 12
        assert truth.id_box is not None
        for b in truth.glyph_boxes:
            assert truth.id_box.contains_box(b)

    def test_deterministic(self):
        a, _ = render_side_mosaic(small_spec(3))
        b, _ = render_side_mosaic(small_spec(3))
        assert np.array_equal(a.data, b.data)

    def test_touching_pair_geometry(self):
        _, truth = render_side_mosaic(small_spec(), touching_pair=4)
        gap = truth.glyph_boxes[5].x - truth.glyph_boxes[4].x2
        assert gap <= 0
        normal_gap = truth.glyph_boxes[2].x - truth.glyph_boxes[1].x2
        assert normal_gap > 6


class TestRoofMosaic:
    def test_truth_bbox_inside_scene(self):
        spec = small_spec(5)
        img, truth = render_roof_mosaic(spec)
        assert truth.present
        b = truth.bbox
        assert 0 <= b.x and b.x2 <= img.width
        assert 0 <= b.y and b.y2 <= img.height

    def test_absent_apparatus(self):
        spec = ScenarioSpec(seed=6, pantograph=PantographSpec(present=False))
        _, truth = render_roof_mosaic(spec)
        assert not truth.present and truth.bbox is None


class TestThermal:
    def test_chains_share_layout_differ_in_noise(self):
        spec = small_spec(7)
        a, _ = render_thermal_chain(spec, "left")
        b, _ = render_thermal_chain(spec, "right")
        assert a.temps.shape == b.temps.shape
        assert not np.array_equal(a.temps, b.temps)
        assert abs(float(a.temps.max()) - float(b.temps.max())) < 3.0

    def test_hotspot_truth_geometry(self):
        spec = ScenarioSpec(seed=8, hotspots=(HotspotSpec(u=0.25, v=0.5,
                                                          radius_px=10,
                                                          temp_c=400.0),))
        mosaic, truth = render_thermal_chain(spec, "left")
        spot = truth.hotspots[0]
        assert mosaic.temps[spot["cy"], spot["cx"]] >= 395.0

    def test_width_follows_duration(self):
        spec = small_spec(9)
        mosaic, _ = render_thermal_chain(spec, "left")
        assert mosaic.width == int(round(0.5 * 512))


class TestFrontal:
    def test_frame_count_floor(self):
        assert frontal_frame_count(small_spec()) == 5
        spec = ScenarioSpec(duration_s=1.999, frontal_rate_hz=25.0)
        assert frontal_frame_count(spec) == 49

    def test_frame_deterministic(self):
        spec = small_spec(11)
        a = render_frontal_frame(spec, 2)
        b = render_frontal_frame(spec, 2)
        assert np.array_equal(a.data, b.data)


class TestWriteScenario:
    def test_bundle_layout_and_determinism(self, tmp_path):
        spec = small_spec(12)
        out_a = write_scenario(spec, tmp_path / "a")
        out_b = write_scenario(spec, tmp_path / "b")
        names = {p.name for p in out_a.iterdir()}
        assert {"side_low.pgm", "side_high.pgm", "thermal_left.tmap",
                "thermal_right.tmap", "frontal", "truth.json",
                "scenario.json"} <= names
        cmp = filecmp.dircmp(out_a, out_b)
        assert not cmp.diff_files and not cmp.left_only and not cmp.right_only

    def test_truth_document_fields(self, tmp_path):
        out = write_scenario(small_spec(13), tmp_path / "x")
        truth = json.loads((out / "truth.json").read_text())
        assert len(truth["glyph_boxes"]) == 12
        assert truth["version"] == "SISS1"
        assert truth["pantograph"]["present"] is True
        assert len(truth["hotspots"]) == 1

    def test_corpus_spec_varies_layout(self):
        a = corpus_spec(1)
        b = corpus_spec(2)
        assert a.wagons[0].id_string != b.wagons[0].id_string
        assert a.wagons[0].id_u != b.wagons[0].id_u
