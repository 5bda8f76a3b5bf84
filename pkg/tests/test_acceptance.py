"""Acceptance suite: one test per release criterion, each printing a
pass/fail line with its measured numbers (run with `pytest -s` to see them
on success).  Tolerances and budgets are fixed here, not tuned elsewhere.
"""

import filecmp
import json
import time
import tracemalloc

import numpy as np
import pytest

from railportal.acquisition import (
    AcquisitionManager,
    Lifecycle,
    SimulatedSensor,
    VirtualClock,
    table_fleet,
    throughput_report,
    transition_legal,
)
from railportal.cli import main as cli_main
from railportal.imgcore import BinaryImage, GrayImage, connected_components, otsu_threshold
from railportal.pantograph import (
    build_index,
    build_model,
    detect_pantograph,
    project_points,
    ransac_fit_projective,
)
from railportal.session import build_pyramid, reassemble_level, tile
from railportal.sift import Keypoint
from railportal.synth import (
    PantographSpec,
    ScenarioSpec,
    WagonSpec,
    corpus_spec,
    pantograph_template,
    render_side_mosaic,
    render_thermal_chain,
)
from railportal.thermal import block_stats, build_mosaic, cross_validate, detect_alarms
from railportal.wagonid import (
    SegmentationError,
    default_params,
    evaluate_segmentation,
    segment_wagon_id,
)

from oracles import flood_fill_components, otsu_exhaustive


def report(name: str, detail: str) -> None:
    print(f"[PASS] {name}: {detail}")


class TestAcceptance:
    def test_otsu_exhaustive_oracle(self):
        t0 = time.time()
        rng = np.random.default_rng(880001)
        mismatches = 0
        for _ in range(500):
            img = rng.integers(0, 256, size=(32, 32), dtype=np.uint8)
            if otsu_threshold(GrayImage(img)).threshold != otsu_exhaustive(img):
                mismatches += 1
        elapsed = time.time() - t0
        assert mismatches == 0
        assert elapsed < 5.0
        report("otsu-oracle", f"500 images, 0 mismatches, {elapsed:.2f}s (< 5s)")

    def test_connected_components_oracle(self):
        t0 = time.time()
        rng = np.random.default_rng(880002)
        for _ in range(200):
            mask = rng.random((64, 64)) < rng.uniform(0.2, 0.6)
            got = connected_components(BinaryImage(mask)).labels
            assert np.array_equal(got, flood_fill_components(mask))
        elapsed = time.time() - t0
        assert elapsed < 10.0
        report("cc-oracle", f"200 masks identical to flood fill, "
                            f"{elapsed:.2f}s (< 10s)")

    def test_wagon_id_synthetic_corpus(self):
        t0 = time.time()
        params = default_params()
        predictions, truths = [], []
        for i in range(50):
            spec = corpus_spec(880100 + i)
            assert spec.distractors >= 30
            assert spec.noise_sigma == 8.0
            img, truth = render_side_mosaic(spec)
            assert (img.width, img.height) == (8192, 1024)
            try:
                seg = segment_wagon_id(img, params, rng_seed=880100 + i)
            except SegmentationError:
                seg = None
            predictions.append(seg)
            truths.append(truth.glyph_boxes)
        metrics = evaluate_segmentation(predictions, truths)
        elapsed = time.time() - t0
        assert metrics.char.accuracy >= 95.0
        assert metrics.char.fp_rate <= 5.0
        assert metrics.full_id.accuracy >= 90.0
        assert elapsed < 180.0
        report("wagon-id-corpus",
               f"50 mosaics | char {metrics.char.accuracy:.1f}% acc "
               f"(>=95), {metrics.char.fp_rate:.1f}% FP (<=5) | "
               f"full-ID {metrics.full_id.accuracy:.1f}% (>=90) | "
               f"{elapsed:.0f}s (< 180s)")

    def test_merge_failure_fixture(self):
        spec = corpus_spec(880200, wagons=(
            WagonSpec(id_string="140378925516", id_u=0.4, id_v=0.5),))
        img, truth = render_side_mosaic(spec, touching_pair=2)
        seg = segment_wagon_id(img, default_params(), rng_seed=880200)
        merged = [cb for cb in seg.char_boxes
                  if cb.contains_box(truth.glyph_boxes[2])
                  and cb.contains_box(truth.glyph_boxes[3])]
        assert len(merged) == 1
        metrics = evaluate_segmentation([seg], [truth.glyph_boxes])
        assert (metrics.char.tp, metrics.char.fn) == (11, 1)
        report("merge-fixture", "touching glyphs merge into one region, "
                                "counted exactly as 1 TP + 1 FN")

    def test_pantograph_detection_proxy(self):
        t0 = time.time()
        model = build_model(pantograph_template())
        rng = np.random.default_rng(880300)
        found_ok, min_iou = 0, 1.0
        for i in range(20):
            pg = PantographSpec(present=True,
                                u=float(rng.uniform(0.15, 0.85)),
                                gain=float(rng.uniform(0.7, 1.3)),
                                shear_deg=float(rng.uniform(-15, 15)),
                                rotate_deg=float(rng.uniform(-5, 5)),
                                scale=float(rng.uniform(0.9, 1.1)))
            spec = ScenarioSpec(seed=880310 + i, pantograph=pg, noise_sigma=5.0)
            scene, truth = synth_roof(spec)
            det = detect_pantograph(scene, model, rng_seed=880310 + i)
            iou = det.p_bbox.iou(truth.bbox) if det.found else 0.0
            min_iou = min(min_iou, iou)
            found_ok += det.found and iou >= 0.8
        false_alarms = 0
        for i in range(20):
            spec = ScenarioSpec(seed=880350 + i, noise_sigma=5.0,
                                pantograph=PantographSpec(present=False))
            scene, _ = synth_roof(spec)
            false_alarms += detect_pantograph(scene, model,
                                              rng_seed=880350 + i).found
        elapsed = time.time() - t0
        assert found_ok == 20
        assert false_alarms == 0
        assert elapsed < 120.0
        report("pantograph-proxy",
               f"20/20 positives (min IoU {min_iou:.3f} >= 0.8), "
               f"0/20 negatives, {elapsed:.0f}s (< 120s)")

    def test_kdtree_exactness(self):
        rng = np.random.default_rng(880400)
        corpus = rng.random((1000, 128)).astype(np.float32)
        queries = rng.random((100, 128)).astype(np.float32)
        kps = [Keypoint(x=0.0, y=0.0, scale=1.0, orientation=0.0)] * 1000
        model = build_index(kps, corpus, (1, 1))
        dist, idx = model.query_2nn(queries)
        mismatches = 0
        corpus64 = corpus.astype(np.float64)
        for qi in range(100):
            diff = corpus64 - queries[qi].astype(np.float64)
            d = np.sqrt((diff * diff).sum(axis=1))
            order = np.lexsort((np.arange(1000), d))[:2]
            if idx[qi].tolist() != order.tolist():
                mismatches += 1
            elif not np.allclose(dist[qi], d[order], rtol=1e-9):
                mismatches += 1
        assert mismatches == 0
        report("kdtree-exactness",
               "exact 2-NN == brute force on 1000x100, 0 mismatches")

    def test_ransac_homography_recovery(self):
        rng = np.random.default_rng(880500)
        worst = 0.0
        corners = np.array([[0, 0], [256, 0], [256, 256], [0, 256]], float)
        for trial in range(50):
            h_true = np.array([
                [rng.uniform(0.9, 1.1), rng.uniform(-0.1, 0.1), rng.uniform(-20, 20)],
                [rng.uniform(-0.1, 0.1), rng.uniform(0.9, 1.1), rng.uniform(-20, 20)],
                [rng.uniform(-1e-4, 1e-4), rng.uniform(-1e-4, 1e-4), 1.0]])
            n_in, n_out = 24, 36      # 60% outliers
            src_in = rng.uniform(10, 246, size=(n_in, 2))
            dst_in = project_points(h_true, src_in)
            src_out = rng.uniform(10, 246, size=(n_out, 2))
            dst_out = (project_points(h_true, src_out)
                       + rng.uniform(10, 60, (n_out, 2)) * rng.choice([-1, 1], (n_out, 2)))
            src = np.vstack([src_in, src_out])
            dst = np.vstack([dst_in, dst_out])
            h_est, _ = ransac_fit_projective(src, dst, iters=1000, tol=3.0,
                                             rng_seed=880500 + trial)
            err = np.hypot(*(project_points(h_est, corners)
                             - project_points(h_true, corners)).T).max()
            worst = max(worst, err)
        assert worst <= 1e-3
        report("ransac-homography",
               f"50 trials at 60% outliers, worst corner error "
               f"{worst:.2e} px (<= 1e-3)")

    def test_thermal_hotspot_and_cross_validation(self):
        from railportal.synth import HotspotSpec

        spec = ScenarioSpec(seed=880600,
                            hotspots=(HotspotSpec(u=0.4, v=0.55, radius_px=12,
                                                  temp_c=300.0),),
                            thermal_noise_c=1.0)
        mosaic_a, truth = render_thermal_chain(spec, "left")
        mosaic_b, _ = render_thermal_chain(spec, "right")
        stats_a = block_stats(mosaic_a, 16, 16)
        alarms = detect_alarms(stats_a, 150.0)
        spot = truth.hotspots[0]
        expected_blocks = set()
        for y in range(spot["cy"] - spot["radius"], spot["cy"] + spot["radius"] + 1):
            for x in range(spot["cx"] - spot["radius"],
                           spot["cx"] + spot["radius"] + 1):
                if (y - spot["cy"]) ** 2 + (x - spot["cx"]) ** 2 <= spot["radius"] ** 2:
                    expected_blocks.add((y // 16, x // 16))
        assert {(a.block_row, a.block_col) for a in alarms} == expected_blocks

        stats_b = block_stats(mosaic_b, 16, 16)
        check = cross_validate(stats_a, stats_b, tol=5.0)
        assert check.passed
        perturbed, _ = render_thermal_chain(spec, "right", max_perturb_c=10.0)
        check_bad = cross_validate(stats_a, block_stats(perturbed, 16, 16),
                                   tol=5.0)
        assert not check_bad.passed
        report("thermal",
               f"{len(alarms)} alarm blocks exactly match hotspot geometry; "
               f"cross-check passes at +-1C noise, fails at +10C")

    def test_acquisition_protocol(self):
        t0 = time.time()
        clock = VirtualClock()
        mgr = AcquisitionManager(clock=clock, token_seed=880700)
        tokens = {}
        for desc in table_fleet():
            prims = ("focus",) if desc.kind == "line-thermal" else ()
            tokens[desc.sensor_id] = mgr.register(desc, f"sim://{desc.sensor_id}",
                                                  prims)
        assert len(mgr.fleet_view()) == 5

        # 10,000 randomized primitive/heartbeat events
        rng = np.random.default_rng(880700)
        ids = list(tokens)
        prev = {sid: Lifecycle.IDLE for sid in ids}
        observed = []
        for _ in range(10_000):
            roll = rng.integers(0, 10)
            if roll < 3:
                clock.advance(float(rng.uniform(0.02, 0.5)))
            elif roll < 6:
                mgr.broadcast(("start", "stop", "pause")[int(rng.integers(0, 3))])
            else:
                sid = ids[int(rng.integers(0, 5))]
                current = mgr.fleet_view()[sid].state.lifecycle
                choices = [current] + [s for s in Lifecycle
                                       if transition_legal(current, s)]
                target = choices[int(rng.integers(0, len(choices)))]
                try:
                    mgr.heartbeat(tokens[sid], target)
                except Exception:
                    pass
            snap = {sid: e.state.lifecycle for sid, e in mgr.fleet_view().items()}
            for sid in ids:
                if snap[sid] is not prev[sid]:
                    observed.append((prev[sid], snap[sid]))
            prev = snap
        illegal = [p for p in observed if not transition_legal(*p)]
        assert illegal == []
        assert mgr.validate_log() == []

        # refused stop while one sensor is SAVING leaves all states unchanged
        mgr2 = AcquisitionManager(clock=VirtualClock(), token_seed=1)
        toks = {d.sensor_id: mgr2.register(d, "sim://x") for d in table_fleet()}
        assert mgr2.broadcast("start").delivered
        mgr2.heartbeat(toks["matrix-0"], Lifecycle.SAVING)
        before = {sid: e.state.lifecycle for sid, e in mgr2.fleet_view().items()}
        out = mgr2.broadcast("stop")
        assert not out.delivered and out.blockers == ["matrix-0"]
        after = {sid: e.state.lifecycle for sid, e in mgr2.fleet_view().items()}
        assert before == after

        # nominal data rates under the virtual clock
        clock3 = VirtualClock()
        sensors = [SimulatedSensor(d, clock3) for d in table_fleet()]
        for s in sensors:
            s.command("start")
        clock3.advance(10.0)
        for s in sensors:
            list(s.pump())
        tp = throughput_report(sensors, 10.0)
        declared = {"matrix-visual": 92e6, "line-visual": 80e6,
                    "line-thermal": 131072.0}
        for row in tp.rows:
            ref = declared[row.kind]
            assert abs(row.measured_rate - ref) / ref < 0.01
        assert tp.aggregate_rate < 270e6 and tp.within_budget
        elapsed = time.time() - t0
        assert elapsed < 30.0
        report("acquisition-protocol",
               f"10k events, 0 illegal transitions; atomic refusal verified; "
               f"rates within 1% of declarations; aggregate "
               f"{tp.aggregate_rate / 1e6:.1f} MB/s < 270 MB/s budget; "
               f"{elapsed:.1f}s (< 30s)")

    def test_tile_pyramid_scale(self, tmp_path):
        rng = np.random.default_rng(880800)
        img = GrayImage(rng.integers(0, 256, size=(4096, 20000), dtype=np.uint8))
        tracemalloc.start()
        pyramid = build_pyramid(img, tmp_path / "pyr")
        _, peak = tracemalloc.get_traced_memory()
        tracemalloc.stop()
        peak_mb = peak / 1e6
        assert peak_mb < 512.0

        assert np.array_equal(reassemble_level(pyramid, 0), img.data)

        lookups = []
        gx, gy = pyramid.grid(0)
        pick = np.random.default_rng(1)
        for _ in range(50):
            tx, ty = int(pick.integers(0, gx)), int(pick.integers(0, gy))
            t0 = time.perf_counter()
            tile(pyramid, 0, tx, ty)
            lookups.append(time.perf_counter() - t0)
        worst_ms = max(lookups) * 1e3
        assert worst_ms < 10.0
        report("tile-pyramid",
               f"4096x20000 reassembles bit-exactly; peak build memory "
               f"{peak_mb:.0f} MB (< 512); worst lookup {worst_ms:.2f} ms (< 10)")

    def test_end_to_end_determinism(self, tmp_path):
        args_sets = []
        for run in ("a", "b"):
            base = tmp_path / run
            rc = cli_main(["synth", "--seed", "880900",
                           "--out", str(base / "raw" / "880900"),
                           "--side-width", "4096", "--side-height", "768",
                           "--distractors", "12"])
            assert rc == 0
            rc = cli_main(["run", "--raw", str(base / "raw" / "880900"),
                           "--out", str(base / "sessions"), "--seed", "11"])
            assert rc == 0
            rc = cli_main(["evaluate", "--sessions", str(base / "sessions"),
                           "--auto", str(base / "raw"),
                           "--out", str(base / "report")])
            assert rc == 0
            args_sets.append(base)

        diffs = _tree_diff(args_sets[0], args_sets[1])
        assert diffs == []
        report("end-to-end-determinism",
               "synth -> run -> evaluate twice: bundles and reports "
               "byte-identical")


def synth_roof(spec):
    from railportal.synth import render_roof_mosaic
    return render_roof_mosaic(spec)


def _tree_diff(a, b) -> list:
    cmp = filecmp.dircmp(a, b)
    diffs = [f"{a}/{n}" for n in cmp.diff_files + cmp.left_only + cmp.right_only]
    for sub in cmp.common_dirs:
        diffs.extend(_tree_diff(a / sub, b / sub))
    return diffs
