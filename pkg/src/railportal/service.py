"""HTTP surface: acquisition-manager control plane plus read-only session
service, on one bind address.

Conventions: JSON request/response bodies; 409 for conflicts and refused
broadcasts, 401 for unknown tokens, 404 for unknown sensors, sessions or
tiles.  A plain-HTML fleet page sits at / for humans.  GET responses carry
permissive CORS headers so the browser console can fetch across origins.

Environment: GATE_BIND_ADDR (host:port), GATE_HEARTBEAT_SECS,
GATE_DISK_BUDGET_MBPS.
"""

from __future__ import annotations

import json
import os
import re
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path

from .acquisition import (
    AcquisitionError,
    AcquisitionManager,
    Lifecycle,
    SensorDescriptor,
)
from .session import SessionFormatError, TilePyramid, list_sessions, load_session, session_dir

DEFAULT_BIND = "127.0.0.1:8020"

_CONTENT_TYPES = {".pgm": "image/x-portable-graymap",
                  ".ppm": "image/x-portable-pixmap",
                  ".tmap": "application/octet-stream",
                  ".json": "application/json",
                  ".html": "text/html; charset=utf-8",
                  ".js": "text/javascript; charset=utf-8",
                  ".css": "text/css; charset=utf-8"}


def env_bind_addr() -> tuple[str, int]:
    raw = os.environ.get("GATE_BIND_ADDR", DEFAULT_BIND)
    host, _, port = raw.rpartition(":")
    return host or "127.0.0.1", int(port)


def env_heartbeat_secs() -> float:
    return float(os.environ.get("GATE_HEARTBEAT_SECS", "1.0"))


def env_disk_budget_bytes() -> float:
    return float(os.environ.get("GATE_DISK_BUDGET_MBPS", "270")) * 1e6


class PortalService:
    """Route table shared by all handler threads."""

    def __init__(self, manager: AcquisitionManager, session_root: str | Path,
                 static_dir: str | Path | None = None,
                 disk_budget_bytes: float | None = None) -> None:
        self.manager = manager
        self.session_root = Path(session_root)
        self.static_dir = Path(static_dir) if static_dir else None
        self.disk_budget_bytes = (disk_budget_bytes if disk_budget_bytes is not None
                                  else env_disk_budget_bytes())

    # -- manager routes -----------------------------------------------------

    def register(self, body: dict) -> tuple[int, dict]:
        desc = SensorDescriptor(
            sensor_id=body["sensor_id"], kind=body["kind"],
            rate_hz=float(body["rate_hz"]),
            resolution=tuple(body["resolution"]),
            bytes_per_sample=float(body.get("bytes_per_sample", 1.0)))
        token = self.manager.register(
            desc, body.get("endpoint", ""),
            tuple(body.get("specific_primitives", ())))
        return 200, {"token": token}

    def heartbeat(self, body: dict) -> tuple[int, dict]:
        out = self.manager.heartbeat(
            body["token"], Lifecycle(body["lifecycle"]),
            bytes_written=body.get("bytes_written"),
            current_session=body.get("current_session"))
        return 200, out

    def fleet(self) -> tuple[int, dict]:
        view = self.manager.fleet_view()
        declared = sum(e.descriptor.declared_rate for e in view.values())
        return 200, {
            "disk_budget_bytes": self.disk_budget_bytes,
            "declared_aggregate_bytes": declared,
            "sensors": {
            sid: {"kind": e.descriptor.kind,
                  "rate_hz": e.descriptor.rate_hz,
                  "resolution": list(e.descriptor.resolution),
                  "declared_rate": e.descriptor.declared_rate,
                  "lifecycle": e.state.lifecycle.value,
                  "last_heartbeat": e.state.last_heartbeat,
                  "bytes_written": e.state.bytes_written,
                  "current_session": e.state.current_session,
                  "stale": e.stale}
            for sid, e in sorted(view.items())}}

    def primitive(self, body: dict) -> tuple[int, dict]:
        outcome = self.manager.broadcast(body["command"])
        doc = {"command": outcome.command, "delivered": outcome.delivered,
               "blockers": outcome.blockers, "session_id": outcome.session_id}
        return (200 if outcome.delivered else 409), doc

    def sensor_primitive(self, sensor_id: str, name: str,
                         body: dict) -> tuple[int, dict]:
        out = self.manager.sensor_primitive(sensor_id, name, body.get("args"))
        return 200, out

    def unregister(self, token: str) -> tuple[int, dict]:
        sensor_id = self.manager.unregister(token)
        return 200, {"ok": True, "sensor_id": sensor_id}

    def fleet_page(self) -> str:
        _, view = self.fleet()
        rows = "".join(
            f"<tr><td>{sid}</td><td>{s['kind']}</td><td>{s['lifecycle']}</td>"
            f"<td>{'stale' if s['stale'] else 'fresh'}</td>"
            f"<td>{s['bytes_written']}</td><td>{s['current_session'] or '-'}</td></tr>"
            for sid, s in view["sensors"].items())
        budget = (f"declared aggregate {view['declared_aggregate_bytes'] / 1e6:.1f}"
                  f" MB/s of {view['disk_budget_bytes'] / 1e6:.0f} MB/s disk budget")
        return ("<!doctype html><html><head><title>Fleet status</title>"
                "<style>table{border-collapse:collapse}td,th{border:1px solid #999;"
                "padding:4px 10px;font-family:monospace}</style></head><body>"
                "<h1>Acquisition fleet</h1><table><tr><th>sensor</th><th>kind</th>"
                "<th>state</th><th>heartbeat</th><th>bytes</th><th>session</th></tr>"
                f"{rows}</table><p>{budget}</p></body></html>")

    # -- session routes -------------------------------------------------------

    def sessions_index(self) -> tuple[int, list]:
        listing = [{"session_id": m.session_id, "created": m.created}
                   for m in list_sessions(self.session_root)]
        return 200, listing

    def manifest(self, session_id: str) -> tuple[int, dict]:
        manifest = load_session(self.session_root, session_id)
        return 200, json.loads(manifest.to_json())

    def tile_bytes(self, session_id: str, role: str, level: int,
                   tx: int, ty: int) -> tuple[bytes, str]:
        manifest = load_session(self.session_root, session_id)
        rel = manifest.pyramids.get(role)
        if rel is None:
            raise SessionFormatError(f"no pyramid for role {role!r}")
        pyramid = TilePyramid.load(session_dir(self.session_root, session_id) / rel)
        gx, gy = (0, 0)
        if 0 <= level < len(pyramid.levels):
            gx, gy = pyramid.grid(level)
        if not (0 <= level < len(pyramid.levels) and 0 <= tx < gx and 0 <= ty < gy):
            raise SessionFormatError(f"tile {level}/{tx}_{ty} out of range")
        path = pyramid.tile_path(level, tx, ty)
        return path.read_bytes(), _CONTENT_TYPES[pyramid.suffix]

    def thermal_raw(self, session_id: str, side: str) -> bytes:
        manifest = load_session(self.session_root, session_id)
        info = manifest.streams.get(f"thermal-{side}")
        if info is None:
            raise SessionFormatError(f"no thermal-{side} stream")
        return (session_dir(self.session_root, session_id) / info.path).read_bytes()

    def detections(self, session_id: str) -> tuple[int, dict]:
        manifest = load_session(self.session_root, session_id)
        bundle = session_dir(self.session_root, session_id)
        return 200, {name: json.loads((bundle / rel).read_text())
                     for name, rel in manifest.detections.items()}

    def artifact_bytes(self, session_id: str, relpath: str) -> tuple[bytes, str]:
        bundle = session_dir(self.session_root, session_id).resolve()
        target = (bundle / relpath).resolve()
        if not target.is_relative_to(bundle):
            raise SessionFormatError("path escapes the session bundle")
        if not target.is_file():
            raise SessionFormatError(f"no artifact {relpath!r}")
        ctype = _CONTENT_TYPES.get(target.suffix, "application/octet-stream")
        return target.read_bytes(), ctype


_ROUTES = [
    ("POST", re.compile(r"^/register$"), "register"),
    ("POST", re.compile(r"^/heartbeat$"), "heartbeat"),
    ("GET", re.compile(r"^/fleet$"), "fleet"),
    ("POST", re.compile(r"^/primitive$"), "primitive"),
    ("POST", re.compile(r"^/sensor/(?P<sid>[^/]+)/primitive/(?P<name>[^/]+)$"),
     "sensor_primitive"),
    ("DELETE", re.compile(r"^/register/(?P<token>[^/]+)$"), "unregister"),
    ("GET", re.compile(r"^/sessions$"), "sessions_index"),
    ("GET", re.compile(r"^/sessions/(?P<sid>[^/]+)/manifest$"), "manifest"),
    ("GET", re.compile(r"^/sessions/(?P<sid>[^/]+)/tiles/(?P<role>[^/]+)/"
                       r"(?P<level>\d+)/(?P<tx>\d+)_(?P<ty>\d+)$"), "tile"),
    ("GET", re.compile(r"^/sessions/(?P<sid>[^/]+)/thermal/(?P<side>left|right)/raw$"),
     "thermal_raw"),
    ("GET", re.compile(r"^/sessions/(?P<sid>[^/]+)/detections$"), "detections"),
    ("GET", re.compile(r"^/sessions/(?P<sid>[^/]+)/files/(?P<rel>.+)$"), "artifact"),
]


class _Handler(BaseHTTPRequestHandler):
    service: PortalService   # injected by make_server

    protocol_version = "HTTP/1.1"

    def log_message(self, fmt, *args):   # quiet by default
        pass

    # -- plumbing -------------------------------------------------------------

    def _send(self, status: int, payload: bytes, ctype: str) -> None:
        self.send_response(status)
        self.send_header("Content-Type", ctype)
        self.send_header("Content-Length", str(len(payload)))
        self.send_header("Access-Control-Allow-Origin", "*")
        self.end_headers()
        self.wfile.write(payload)

    def _send_json(self, status: int, doc) -> None:
        self._send(status, json.dumps(doc, sort_keys=True).encode(),
                   "application/json")

    def _read_body(self) -> dict:
        length = int(self.headers.get("Content-Length") or 0)
        if length == 0:
            return {}
        try:
            return json.loads(self.rfile.read(length))
        except json.JSONDecodeError:
            return {}

    def _dispatch(self, method: str) -> None:
        svc = self.service
        path = self.path.split("?", 1)[0]
        try:
            for verb, pattern, name in _ROUTES:
                if verb != method:
                    continue
                m = pattern.match(path)
                if not m:
                    continue
                self._route(svc, name, m)
                return
            if method == "GET" and path == "/":
                self._send(200, svc.fleet_page().encode(),
                           _CONTENT_TYPES[".html"])
                return
            if method == "GET" and path.startswith("/console/") and svc.static_dir:
                self._static(path)
                return
            self._send_json(404, {"error": f"no route {method} {path}"})
        except AcquisitionError as exc:
            self._send_json(exc.status, {"error": str(exc)})
        except SessionFormatError as exc:
            self._send_json(404, {"error": str(exc)})
        except (KeyError, ValueError, TypeError) as exc:
            self._send_json(400, {"error": f"bad request: {exc}"})

    def _route(self, svc: PortalService, name: str, m: re.Match) -> None:
        if name == "register":
            status, doc = svc.register(self._read_body())
        elif name == "heartbeat":
            status, doc = svc.heartbeat(self._read_body())
        elif name == "fleet":
            status, doc = svc.fleet()
        elif name == "primitive":
            status, doc = svc.primitive(self._read_body())
        elif name == "sensor_primitive":
            status, doc = svc.sensor_primitive(m["sid"], m["name"],
                                               self._read_body())
        elif name == "unregister":
            status, doc = svc.unregister(m["token"])
        elif name == "sessions_index":
            status, doc = svc.sessions_index()
        elif name == "manifest":
            status, doc = svc.manifest(m["sid"])
        elif name == "tile":
            payload, ctype = svc.tile_bytes(m["sid"], m["role"], int(m["level"]),
                                            int(m["tx"]), int(m["ty"]))
            self._send(200, payload, ctype)
            return
        elif name == "thermal_raw":
            self._send(200, svc.thermal_raw(m["sid"], m["side"]),
                       _CONTENT_TYPES[".tmap"])
            return
        elif name == "detections":
            status, doc = svc.detections(m["sid"])
        elif name == "artifact":
            payload, ctype = svc.artifact_bytes(m["sid"], m["rel"])
            self._send(200, payload, ctype)
            return
        else:   # pragma: no cover
            status, doc = 500, {"error": "unroutable"}
        self._send_json(status, doc)

    def _static(self, path: str) -> None:
        rel = path[len("/console/"):] or "index.html"
        base = self.service.static_dir.resolve()
        target = (base / rel).resolve()
        if not (target.is_relative_to(base) and target.is_file()):
            self._send_json(404, {"error": f"no console asset {rel!r}"})
            return
        ctype = _CONTENT_TYPES.get(target.suffix, "application/octet-stream")
        self._send(200, target.read_bytes(), ctype)

    def do_GET(self):
        self._dispatch("GET")

    def do_POST(self):
        self._dispatch("POST")

    def do_DELETE(self):
        self._dispatch("DELETE")


def make_server(service: PortalService, host: str = "127.0.0.1",
                port: int = 0) -> ThreadingHTTPServer:
    handler = type("BoundHandler", (_Handler,), {"service": service})
    return ThreadingHTTPServer((host, port), handler)


def serve_forever_in_thread(server: ThreadingHTTPServer) -> threading.Thread:
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    return thread
