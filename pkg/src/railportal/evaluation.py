"""Batch evaluation of processed sessions against synthetic ground truth.

Reconstructs segmentation results from session detection documents, scores
them with the character/full-identifier conventions, adds apparatus
detection outcomes, and emits the metrics document, a delimited table and
review figures.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .imgcore import BBox
from .report import (
    render_pantograph_figure,
    render_segmentation_figures,
    write_metrics_csv,
)
from .session import load_session, session_dir
from .wagonid import (
    IdSegmentation,
    SegmentationMetrics,
    VoteVector,
    evaluate_segmentation,
)


class EvaluationError(ValueError):
    pass


def _box(d: dict) -> BBox:
    return BBox(d["x"], d["y"], d["w"], d["h"])


def segmentation_from_document(doc: dict) -> IdSegmentation | None:
    if not doc.get("found"):
        return None
    line = doc["fitted_line"]
    return IdSegmentation(
        id_box=_box(doc["id_box"]),
        char_boxes=[_box(b) for b in doc["char_boxes"]],
        votes=VoteVector(votes=np.array(doc["votes"], dtype=np.int64),
                         weighted=np.array(doc["weighted"], dtype=np.float64)),
        fitted_line=(line["slope"], line["intercept"]))


@dataclass
class PantographOutcomes:
    found: list[bool] = field(default_factory=list)
    present: list[bool] = field(default_factory=list)

    @property
    def counts(self) -> dict:
        pairs = list(zip(self.found, self.present))
        return {"tp": sum(f and p for f, p in pairs),
                "fn": sum((not f) and p for f, p in pairs),
                "fp": sum(f and (not p) for f, p in pairs),
                "tn": sum((not f) and (not p) for f, p in pairs)}


@dataclass
class BatchEvaluation:
    labels: list[str]
    segmentation: SegmentationMetrics
    pantograph: PantographOutcomes

    def summary_dict(self) -> dict:
        seg = self.segmentation
        return {
            "images": len(self.labels),
            "char": {"tp": seg.char.tp, "fn": seg.char.fn, "fp": seg.char.fp,
                     "accuracy": round(seg.char.accuracy, 2),
                     "fn_rate": round(seg.char.fn_rate, 2),
                     "fp_rate": round(seg.char.fp_rate, 2)},
            "full_id": {"tp": seg.full_id.tp, "fn": seg.full_id.fn,
                        "fp": seg.full_id.fp,
                        "accuracy": round(seg.full_id.accuracy, 2),
                        "fn_rate": round(seg.full_id.fn_rate, 2),
                        "fp_rate": round(seg.full_id.fp_rate, 2)},
            "pantograph": self.pantograph.counts,
        }


def evaluate_batch(session_root: str | Path, session_ids: list[str],
                   truth_dirs: list[str | Path]) -> BatchEvaluation:
    """Score aligned (session, raw-truth-directory) pairs."""
    if len(session_ids) != len(truth_dirs):
        raise EvaluationError(f"{len(session_ids)} sessions vs "
                              f"{len(truth_dirs)} truth directories")
    predictions: list[IdSegmentation | None] = []
    glyph_truth: list[list[BBox]] = []
    outcomes = PantographOutcomes()
    for sid, truth_dir in zip(session_ids, truth_dirs):
        manifest = load_session(session_root, sid)
        bundle = session_dir(session_root, sid)
        seg_doc = json.loads((bundle / manifest.detections["wagon_id"]).read_text())
        predictions.append(segmentation_from_document(seg_doc))
        pg_doc = json.loads((bundle / manifest.detections["pantograph"]).read_text())
        truth = json.loads((Path(truth_dir) / "truth.json").read_text())
        glyph_truth.append([_box(b) for b in truth["glyph_boxes"]])
        outcomes.found.append(bool(pg_doc["found"]))
        outcomes.present.append(bool(truth["pantograph"]["present"]))
    metrics = evaluate_segmentation(predictions, glyph_truth)
    return BatchEvaluation(labels=list(session_ids), segmentation=metrics,
                           pantograph=outcomes)


def write_evaluation_report(result: BatchEvaluation, out_dir: str | Path) -> dict:
    """metrics.json + metrics.csv + figures under out_dir."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    summary = result.summary_dict()
    (out / "metrics.json").write_text(
        json.dumps(summary, indent=2, sort_keys=True) + "\n")
    write_metrics_csv(result.segmentation, result.labels, out / "metrics.csv")
    render_segmentation_figures(result.segmentation, result.labels, out)
    render_pantograph_figure(result.pantograph.found, result.pantograph.present,
                             out)
    return summary
