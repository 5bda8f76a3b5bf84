"""Command-line entry point.

Subcommands: synth, segment-id, thermal-scan, detect-pantograph, build-model,
run, tile, evaluate, serve.  Exit codes: 0 success, 2 validation error,
3 pipeline stage failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

log = logging.getLogger("railportal")

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_PIPELINE = 3


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, default=0, help="deterministic seed")
    p.add_argument("--config", type=Path, default=None,
                   help="TOML pipeline configuration")
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="railportal",
        description="Desk-scale rail inspection portal: synthetic passages, "
                    "analysis pipelines, tiling, evaluation and services.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic passage")
    _add_common(p)
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--id", dest="id_string", default=None,
                   help="12-character wagon identifier (default: seed-derived)")
    p.add_argument("--distractors", type=int, default=None)
    p.add_argument("--noise-sigma", type=float, default=None)
    p.add_argument("--side-width", type=int, default=None)
    p.add_argument("--side-height", type=int, default=None)
    p.add_argument("--no-pantograph", action="store_true")
    p.add_argument("--touching-pair", type=int, default=None,
                   help="render glyph i and i+1 touching (merge fixture)")

    p = sub.add_parser("segment-id", help="segment the wagon identifier")
    _add_common(p)
    p.add_argument("--input", type=Path, required=True, help="side mosaic PGM")
    p.add_argument("--params", type=Path, default=None,
                   help="TOML config (alias of --config)")
    p.add_argument("--out", type=Path, required=True, help="result JSON")
    p.add_argument("--strip-width", type=int, default=None)

    p = sub.add_parser("thermal-scan", help="block stats, alarms, cross-check")
    _add_common(p)
    p.add_argument("--left", type=Path, required=True, help="chain A .tmap")
    p.add_argument("--right", type=Path, default=None, help="chain B .tmap")
    p.add_argument("--out", type=Path, required=True, help="report directory")

    p = sub.add_parser("detect-pantograph", help="detect the roof apparatus")
    _add_common(p)
    p.add_argument("--scene", type=Path, required=True, help="roof mosaic PGM")
    p.add_argument("--model", type=Path, default=None,
                   help="PGFM1 feature model (default: built-in template)")
    p.add_argument("--out", type=Path, required=True, help="detection JSON")

    p = sub.add_parser("build-model", help="build a PGFM1 feature model")
    _add_common(p)
    p.add_argument("--template", type=Path, default=None,
                   help="template PGM (default: built-in synthetic template)")
    p.add_argument("--out", type=Path, required=True)

    p = sub.add_parser("run", help="process a raw passage into a session")
    _add_common(p)
    p.add_argument("--raw", type=Path, required=True)
    p.add_argument("--out", type=Path, required=True, help="session root")

    p = sub.add_parser("tile", help="tile an image into a pyramid")
    _add_common(p)
    p.add_argument("--input", type=Path, required=True)
    p.add_argument("--out", type=Path, required=True)

    p = sub.add_parser("evaluate", help="score sessions against ground truth")
    _add_common(p)
    p.add_argument("--sessions", type=Path, required=True, help="session root")
    p.add_argument("--pair", action="append", default=[],
                   metavar="SESSION_ID:RAW_DIR",
                   help="aligned session/truth pair (repeatable)")
    p.add_argument("--auto", type=Path, default=None,
                   help="scan a directory of raw passages and pair by seed")
    p.add_argument("--out", type=Path, required=True, help="report directory")

    p = sub.add_parser("serve", help="serve manager + session APIs")
    _add_common(p)
    p.add_argument("--sessions", type=Path, required=True)
    p.add_argument("--bind", default=None, help="host:port (default env "
                                                "GATE_BIND_ADDR)")
    p.add_argument("--static", type=Path, default=None,
                   help="operator console build to serve at /console/")
    p.add_argument("--sim-fleet", action="store_true",
                   help="register a simulated five-sensor fleet")
    return parser


# ---------------------------------------------------------------------------
# Subcommand bodies
# ---------------------------------------------------------------------------

def cmd_synth(args) -> int:
    from .synth import corpus_spec, write_scenario

    spec = corpus_spec(args.seed)
    overrides = {}
    if args.id_string is not None:
        overrides["wagons"] = (replace(spec.wagons[0], id_string=args.id_string),)
    if args.distractors is not None:
        overrides["distractors"] = args.distractors
    if args.noise_sigma is not None:
        overrides["noise_sigma"] = args.noise_sigma
    if args.side_width is not None:
        overrides["side_width"] = args.side_width
    if args.side_height is not None:
        overrides["side_height"] = args.side_height
    if args.no_pantograph:
        overrides["pantograph"] = replace(spec.pantograph, present=False)
    if overrides:
        spec = replace(spec, **overrides)
    out = write_scenario(spec, args.out, touching_pair=args.touching_pair)
    print(f"synthesized passage seed={spec.seed} -> {out}")
    return EXIT_OK


def _load_cfg(args, params_attr: str = "config"):
    from .config import load_config
    path = getattr(args, "params", None) or args.config
    return load_config(path)


def cmd_segment_id(args) -> int:
    from .imgcore import read_pgm
    from .pipeline import segmentation_document
    from .wagonid import SegmentationError, segment_wagon_id

    cfg = _load_cfg(args)
    img = read_pgm(args.input)
    stream_info = _sibling_stream_info(args.input, "side-low")
    try:
        seg = segment_wagon_id(img, cfg.segmentation, rng_seed=args.seed,
                               strip_width=args.strip_width)
        doc = segmentation_document(seg, None, stream_info, args.seed)
    except SegmentationError as exc:
        doc = segmentation_document(None, exc.code, stream_info, args.seed)
    args.out.parent.mkdir(parents=True, exist_ok=True)
    args.out.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    n = len(doc["char_boxes"])
    print(f"segment-id: found={doc['found']} char_boxes={n} -> {args.out}")
    return EXIT_OK


def _sibling_stream_info(input_path: Path, role: str) -> dict:
    scenario = input_path.parent / "scenario.json"
    if scenario.exists():
        doc = json.loads(scenario.read_text())
        if role in doc.get("streams", {}):
            return doc["streams"][role]
    # bare mosaic: one column per second from t=0
    return {"rate_hz": 1.0, "start_time": 0.0}


def cmd_thermal_scan(args) -> int:
    import csv

    from .imgcore import write_ppm
    from .pipeline import thermal_document
    from .report import render_thermal_figure
    from .thermal import block_stats, colorize, read_tmap, report_from_mosaics

    cfg = _load_cfg(args)
    mosaic_a = read_tmap(args.left)
    mosaic_b = read_tmap(args.right) if args.right else None
    report, stats_a = report_from_mosaics(
        mosaic_a, mosaic_b, cfg.thermal.block,
        cfg.thermal.alarm_threshold_c, cfg.thermal.cross_tol_c)
    stats = {"left": stats_a,
             "right": (block_stats(mosaic_b, cfg.thermal.block, cfg.thermal.block)
                       if mosaic_b is not None else None)}
    out = args.out
    out.mkdir(parents=True, exist_ok=True)
    doc = thermal_document(report, stats, cfg)
    (out / "thermal.json").write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    with open(out / "alarms.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["block_row", "block_col", "max_c", "threshold_c"])
        for a in report.alarms:
            writer.writerow([a.block_row, a.block_col, f"{a.max_c:.2f}",
                             f"{a.threshold_c:g}"])
    write_ppm(colorize(mosaic_a), out / "preview_left.ppm")
    render_thermal_figure(stats_a, report.alarms, cfg.thermal.alarm_threshold_c,
                          out / "block_max.png")
    cross = doc["cross_check"]
    print(f"thermal-scan: alarms={len(report.alarms)} cross_check="
          f"{cross if isinstance(cross, str) else ('pass' if cross['passed'] else 'FAIL')}"
          f" -> {out}")
    return EXIT_OK


def cmd_detect_pantograph(args) -> int:
    from .imgcore import read_pgm
    from .pantograph import build_model, detect_pantograph, load_model
    from .pipeline import detection_document
    from .synth import pantograph_template

    cfg = _load_cfg(args)
    scene = read_pgm(args.scene)
    model = (load_model(args.model) if args.model
             else build_model(pantograph_template(), cfg.detector.sift))
    det = detect_pantograph(scene, model, cfg.detector, rng_seed=args.seed)
    stream_info = _sibling_stream_info(args.scene, "side-high")
    doc = detection_document(det, stream_info, args.seed)
    args.out.parent.mkdir(parents=True, exist_ok=True)
    args.out.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    print(f"detect-pantograph: found={det.found} inliers={det.inlier_count} "
          f"-> {args.out}")
    return EXIT_OK


def cmd_build_model(args) -> int:
    from .imgcore import read_pgm
    from .pantograph import build_model, save_model
    from .synth import pantograph_template

    cfg = _load_cfg(args)
    template = read_pgm(args.template) if args.template else pantograph_template()
    model = build_model(template, cfg.detector.sift)
    args.out.parent.mkdir(parents=True, exist_ok=True)
    save_model(model, args.out)
    print(f"build-model: {model.count} keypoints -> {args.out}")
    return EXIT_OK


def cmd_run(args) -> int:
    from .pipeline import run_pipeline

    cfg = _load_cfg(args)
    session_id = run_pipeline(args.raw, args.out, seed=args.seed, config=cfg)
    print(f"run: session {session_id} -> {args.out / session_id}")
    return EXIT_OK


def cmd_tile(args) -> int:
    from .imgcore import read_pgm
    from .session import build_pyramid

    pyramid = build_pyramid(read_pgm(args.input), args.out)
    print(f"tile: {len(pyramid.levels)} levels, level-0 grid "
          f"{pyramid.grid(0)[0]}x{pyramid.grid(0)[1]} -> {args.out}")
    return EXIT_OK


def cmd_evaluate(args) -> int:
    from .evaluation import evaluate_batch, write_evaluation_report

    pairs: list[tuple[str, Path]] = []
    for raw_pair in args.pair:
        sid, _, raw_dir = raw_pair.partition(":")
        if not raw_dir:
            raise ValueError(f"--pair needs SESSION_ID:RAW_DIR, got {raw_pair!r}")
        pairs.append((sid, Path(raw_dir)))
    if args.auto:
        for scenario in sorted(args.auto.glob("*/scenario.json")):
            seed = json.loads(scenario.read_text())["spec"]["seed"]
            pairs.append((f"s{seed:08d}", scenario.parent))
    if not pairs:
        raise ValueError("no session/truth pairs (use --pair or --auto)")
    result = evaluate_batch(args.sessions, [p[0] for p in pairs],
                            [p[1] for p in pairs])
    summary = write_evaluation_report(result, args.out)
    char = summary["char"]
    full = summary["full_id"]
    print(f"evaluate: {summary['images']} images | char "
          f"{char['accuracy']:.1f}/{char['fn_rate']:.1f}/{char['fp_rate']:.1f} "
          f"| full-id {full['accuracy']:.1f}/{full['fn_rate']:.1f}/"
          f"{full['fp_rate']:.1f} (Accuracy/FN/FP %) -> {args.out}")
    return EXIT_OK


def cmd_serve(args) -> int:
    from .acquisition import AcquisitionManager, WallClock
    from .service import PortalService, env_bind_addr, env_heartbeat_secs, make_server

    if args.bind:
        host, _, port_s = args.bind.rpartition(":")
        host, port = host or "127.0.0.1", int(port_s)
    else:
        host, port = env_bind_addr()
    manager = AcquisitionManager(clock=WallClock(),
                                 heartbeat_period=env_heartbeat_secs(),
                                 token_seed=args.seed)
    service = PortalService(manager, args.sessions, static_dir=args.static)
    server = make_server(service, host, port)

    stop_signals = []
    if args.sim_fleet:
        stop_signals.append(_start_sim_fleet(manager))
    addr = server.server_address
    print(f"serving manager + sessions on http://{addr[0]}:{addr[1]}/ "
          f"(sessions root: {args.sessions})")
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        for stop in stop_signals:
            stop.set()
        server.server_close()
    return EXIT_OK


def _start_sim_fleet(manager):
    import threading

    from .acquisition import SPECIFIC_PRIMITIVES, SimulatedSensor, table_fleet

    stop = threading.Event()

    def loop():
        sensors = []
        for desc in table_fleet():
            token = manager.register(desc, f"sim://{desc.sensor_id}",
                                     SPECIFIC_PRIMITIVES[desc.kind])
            sensor = SimulatedSensor(desc, manager.clock)
            sensors.append((token, sensor))
        while not stop.is_set():
            for token, sensor in sensors:
                view = manager.fleet_view().get(sensor.descriptor.sensor_id)
                if view is None:
                    continue
                target = view.state.lifecycle
                if sensor.lifecycle is not target:
                    try:
                        sensor.command({"ACQUIRING": "start", "SAVING": "stop",
                                        "PAUSED": "pause", "IDLE": "reset",
                                        "ERROR": "fault"}[target.value])
                    except Exception:
                        pass
                list(sensor.pump())
                sensor.tick()
                try:
                    manager.heartbeat(token, sensor.lifecycle,
                                      bytes_written=sensor.bytes_written)
                except Exception:
                    pass
            stop.wait(manager.heartbeat_period)

    threading.Thread(target=loop, daemon=True).start()
    return stop


_COMMANDS = {
    "synth": cmd_synth,
    "segment-id": cmd_segment_id,
    "thermal-scan": cmd_thermal_scan,
    "detect-pantograph": cmd_detect_pantograph,
    "build-model": cmd_build_model,
    "run": cmd_run,
    "tile": cmd_tile,
    "evaluate": cmd_evaluate,
    "serve": cmd_serve,
}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s")

    from .config import ConfigError
    from .pipeline import PipelineStageError
    from .synth import ScenarioError

    try:
        return _COMMANDS[args.command](args)
    except PipelineStageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PIPELINE
    except (ScenarioError, ConfigError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
