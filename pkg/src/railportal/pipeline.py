"""Raw passage streams -> processed session bundle.

Runs the three analysis pipelines over a recorded (or synthesized) raw
directory, builds tile pyramids, and writes the session manifest.  The
whole path is deterministic: detection documents, pyramids and manifests
are byte-stable for fixed inputs and seed.
"""

from __future__ import annotations

import json
import logging
import shutil
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import session as sess
from . import thermal as th
from .config import PipelineConfig
from .imgcore import BBox, read_pgm
from .pantograph import FeatureModel, PantographDetection, build_model, detect_pantograph
from .synth import pantograph_template
from .wagonid import IdSegmentation, SegmentationError, segment_wagon_id

log = logging.getLogger(__name__)

DOC_VERSION = "SISS1"


class PipelineStageError(RuntimeError):
    def __init__(self, stage: str, message: str) -> None:
        super().__init__(f"[{stage}] {message}")
        self.stage = stage


def _box_dict(b: BBox | None) -> dict | None:
    return None if b is None else {"x": b.x, "y": b.y, "w": b.w, "h": b.h}


def _dump(doc: dict, path: Path) -> None:
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


def _stream_timing(info: dict, x0: int, x1: int) -> dict:
    """Time window covered by a mosaic column span, for timeline sync."""
    rate = info["rate_hz"]
    return {"rate_hz": rate, "start_time": info["start_time"],
            "t0": info["start_time"] + x0 / rate,
            "t1": info["start_time"] + x1 / rate}


def segmentation_document(result: IdSegmentation | None, error: str | None,
                          stream_info: dict, seed: int) -> dict:
    doc = {"version": DOC_VERSION, "seed": seed, "found": result is not None}
    if result is None:
        doc.update({"error": error, "id_box": None, "char_boxes": [],
                    "votes": [], "weighted": [], "fitted_line": None,
                    "timing": None})
        return doc
    doc.update({
        "id_box": _box_dict(result.id_box),
        "char_boxes": [_box_dict(b) for b in result.char_boxes],
        "votes": result.votes.votes.tolist(),
        "weighted": [round(float(v), 9) for v in result.votes.weighted],
        "fitted_line": {"slope": result.fitted_line[0],
                        "intercept": result.fitted_line[1]},
        "timing": _stream_timing(stream_info, result.id_box.x, result.id_box.x2),
    })
    return doc


def detection_document(det: PantographDetection, stream_info: dict,
                       seed: int) -> dict:
    doc = {"version": DOC_VERSION, "seed": seed, "found": det.found,
           "inlier_count": det.inlier_count,
           "homography": (np.round(det.homography, 12).tolist()
                          if det.homography is not None else None),
           "p_bbox": _box_dict(det.p_bbox)}
    doc["timing"] = (_stream_timing(stream_info, det.p_bbox.x, det.p_bbox.x2)
                     if det.found else None)
    return doc


def thermal_document(report_a: th.ThermalReport | None,
                     stats: dict[str, th.BlockStats | None],
                     cfg: PipelineConfig) -> dict:
    chains = {}
    for side in ("left", "right"):
        s = stats.get(side)
        chains[side] = None if s is None else {
            "global_min": round(s.global_min, 4),
            "global_max": round(s.global_max, 4),
            "grid": [s.mean.shape[1], s.mean.shape[0]],
        }
    doc = {"version": DOC_VERSION,
           "block": cfg.thermal.block,
           "threshold_c": cfg.thermal.alarm_threshold_c,
           "chains": chains,
           "alarms": [], "cross_check": "unavailable"}
    if report_a is not None:
        doc["alarms"] = [{"block_row": a.block_row, "block_col": a.block_col,
                          "max_c": round(a.max_c, 4),
                          "threshold_c": a.threshold_c}
                         for a in report_a.alarms]
        doc["clamped_count"] = report_a.clamped_count
        if report_a.cross_check is not None:
            c = report_a.cross_check
            doc["cross_check"] = {"passed": c.passed,
                                  "min_delta": round(c.min_delta, 6),
                                  "max_delta": round(c.max_delta, 6),
                                  "tol": c.tol}
    return doc


def run_pipeline(raw_dir: str | Path, out_root: str | Path, seed: int = 0,
                 config: PipelineConfig | None = None,
                 model: FeatureModel | None = None) -> str:
    """Process one raw passage directory into a session bundle.

    Returns the session id.  Analysis misses (no identifier candidates, no
    apparatus) are recorded in the detection documents; only structural
    problems (missing streams, unreadable rasters) abort, naming the stage.
    """
    raw = Path(raw_dir)
    cfg = config or PipelineConfig()
    scenario_path = raw / "scenario.json"
    if not scenario_path.exists():
        raise PipelineStageError("load", f"missing {scenario_path}")
    scenario = json.loads(scenario_path.read_text())
    streams = scenario["streams"]
    spec_seed = scenario.get("spec", {}).get("seed", seed)

    session_id = f"s{spec_seed:08d}"
    bundle = sess.session_dir(out_root, session_id)
    if bundle.exists():
        shutil.rmtree(bundle)
    bundle.mkdir(parents=True)

    # -- wagon identifier ----------------------------------------------------
    try:
        side_low = read_pgm(raw / "side_low.pgm")
    except (OSError, ValueError) as exc:
        raise PipelineStageError("wagon-id", f"cannot read side_low.pgm: {exc}")
    try:
        seg = segment_wagon_id(side_low, cfg.segmentation, rng_seed=seed)
        seg_err = None
    except SegmentationError as exc:
        log.warning("wagon-id segmentation found nothing: %s", exc)
        seg, seg_err = None, exc.code
    _dump(segmentation_document(seg, seg_err, streams["side-low"], seed),
          bundle / "wagon_id.json")

    # -- pantograph ----------------------------------------------------------
    try:
        side_high = read_pgm(raw / "side_high.pgm")
    except (OSError, ValueError) as exc:
        raise PipelineStageError("pantograph", f"cannot read side_high.pgm: {exc}")
    model = model if model is not None else build_model(pantograph_template(),
                                                        cfg.detector.sift)
    det = detect_pantograph(side_high, model, cfg.detector, rng_seed=seed)
    _dump(detection_document(det, streams["side-high"], seed),
          bundle / "pantograph.json")

    # -- thermal chains --------------------------------------------------------
    stats: dict[str, th.BlockStats | None] = {"left": None, "right": None}
    mosaics: dict[str, th.ThermalMosaic | None] = {"left": None, "right": None}
    for side in ("left", "right"):
        path = raw / f"thermal_{side}.tmap"
        if path.exists():
            info = streams[f"thermal-{side}"]
            mosaics[side] = th.read_tmap(path, start_time=info["start_time"],
                                         line_period=1.0 / info["rate_hz"])
    if mosaics["left"] is None:
        raise PipelineStageError("thermal", "missing thermal_left.tmap")
    report, stats["left"] = th.report_from_mosaics(
        mosaics["left"], mosaics["right"], cfg.thermal.block,
        cfg.thermal.alarm_threshold_c, cfg.thermal.cross_tol_c)
    if mosaics["right"] is not None:
        stats["right"] = th.block_stats(mosaics["right"], cfg.thermal.block,
                                        cfg.thermal.block)
    _dump(thermal_document(report, stats, cfg), bundle / "thermal.json")

    # -- artifacts and pyramids ------------------------------------------------
    shutil.copy(raw / "side_low.pgm", bundle / "side_low.pgm")
    shutil.copy(raw / "side_high.pgm", bundle / "side_high.pgm")
    frames_src = raw / "frontal"
    if frames_src.is_dir():
        shutil.copytree(frames_src, bundle / "frontal")
    pyramids = {}
    sess.build_pyramid(side_low, bundle / "tiles" / "side-low")
    pyramids["side-low"] = "tiles/side-low"
    sess.build_pyramid(side_high, bundle / "tiles" / "side-high")
    pyramids["side-high"] = "tiles/side-high"
    for side in ("left", "right"):
        mosaic = mosaics[side]
        if mosaic is None:
            continue
        shutil.copy(raw / f"thermal_{side}.tmap", bundle / f"thermal_{side}.tmap")
        preview = th.colorize(mosaic)
        sess.build_pyramid(preview, bundle / "tiles" / f"thermal-{side}")
        pyramids[f"thermal-{side}"] = f"tiles/thermal-{side}"

    # -- manifest ---------------------------------------------------------------
    stream_infos = {}
    role_paths = {"frontal": "frontal", "side-low": "side_low.pgm",
                  "side-high": "side_high.pgm",
                  "thermal-left": "thermal_left.tmap",
                  "thermal-right": "thermal_right.tmap"}
    for role, info in streams.items():
        path = role_paths[role]
        if not (bundle / path).exists():
            continue
        stream_infos[role] = sess.StreamInfo(
            role=role, start_time=info["start_time"], rate_hz=info["rate_hz"],
            dims=tuple(info["dims"]), path=path, count=info.get("count"))
    manifest = sess.SessionManifest(
        session_id=session_id, created=float(spec_seed),
        streams=stream_infos,
        detections={"wagon_id": "wagon_id.json",
                    "pantograph": "pantograph.json",
                    "thermal": "thermal.json"},
        pyramids=pyramids)
    sess.save_session(manifest, out_root)
    return session_id
