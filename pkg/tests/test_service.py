import json
import urllib.request
from urllib.error import HTTPError

import numpy as np
import pytest

from railportal.acquisition import AcquisitionManager, VirtualClock, line_thermal
from railportal.pipeline import run_pipeline
from railportal.service import PortalService, make_server, serve_forever_in_thread
from railportal.synth import ScenarioSpec, write_scenario


@pytest.fixture(scope="module")
def portal(tmp_path_factory):
    root = tmp_path_factory.mktemp("svc")
    spec = ScenarioSpec(seed=501, side_width=2048, side_height=512,
                        roof_width=1024, roof_height=384, distractors=5,
                        duration_s=0.5, frontal_rate_hz=10.0)
    raw = write_scenario(spec, root / "raw")
    sid = run_pipeline(raw, root / "sessions", seed=3)
    manager = AcquisitionManager(clock=VirtualClock(), token_seed=5)
    service = PortalService(manager, root / "sessions")
    server = make_server(service)
    serve_forever_in_thread(server)
    host, port = server.server_address
    yield f"http://{host}:{port}", manager, sid
    server.shutdown()
    server.server_close()


def request(method, url, body=None):
    data = json.dumps(body).encode() if body is not None else None
    req = urllib.request.Request(url, data=data, method=method,
                                 headers={"Content-Type": "application/json"})
    try:
        with urllib.request.urlopen(req, timeout=10) as resp:
            return resp.status, resp.read(), dict(resp.headers)
    except HTTPError as exc:
        return exc.code, exc.read(), dict(exc.headers)


def get_json(url):
    status, payload, _ = request("GET", url)
    return status, json.loads(payload)


def thermal_sensor_body(sensor_id):
    d = line_thermal(sensor_id)
    return {"sensor_id": d.sensor_id, "kind": d.kind, "rate_hz": d.rate_hz,
            "resolution": list(d.resolution),
            "bytes_per_sample": d.bytes_per_sample,
            "endpoint": f"sim://{sensor_id}",
            "specific_primitives": ["focus"]}


class TestManagerRoutes:
    def test_register_heartbeat_fleet(self, portal):
        base, _, _ = portal
        status, doc = request("POST", f"{base}/register",
                              thermal_sensor_body("th-a"))[0], None
        assert status == 200
        status, doc = get_json(f"{base}/fleet")
        assert status == 200
        assert "th-a" in doc["sensors"]
        assert doc["sensors"]["th-a"]["lifecycle"] == "IDLE"

    def test_duplicate_register_409(self, portal):
        base, _, _ = portal
        request("POST", f"{base}/register", thermal_sensor_body("th-dup"))
        status, payload, _ = request("POST", f"{base}/register",
                                     thermal_sensor_body("th-dup"))
        assert status == 409

    def test_heartbeat_unknown_token_401(self, portal):
        base, _, _ = portal
        status, _, _ = request("POST", f"{base}/heartbeat",
                               {"token": "tok-none", "lifecycle": "IDLE"})
        assert status == 401

    def test_illegal_heartbeat_409(self, portal):
        base, _, _ = portal
        _, payload, _ = request("POST", f"{base}/register",
                                thermal_sensor_body("th-ill"))
        token = json.loads(payload)["token"]
        status, _, _ = request("POST", f"{base}/heartbeat",
                               {"token": token, "lifecycle": "SAVING"})
        assert status == 409

    def test_refused_broadcast_409_with_blockers(self, portal):
        base, mgr, _ = portal
        # th-ill sits in ERROR from the previous scenario; start must refuse
        status, payload, _ = request("POST", f"{base}/primitive",
                                     {"command": "start"})
        assert status == 409
        doc = json.loads(payload)
        assert doc["delivered"] is False and doc["blockers"]

    def test_sensor_primitive_routes(self, portal):
        base, _, _ = portal
        request("POST", f"{base}/register", thermal_sensor_body("th-b"))
        status, payload, _ = request("POST",
                                     f"{base}/sensor/th-b/primitive/focus",
                                     {"args": {"step": 1}})
        assert status == 200 and json.loads(payload)["ok"]
        status, _, _ = request("POST", f"{base}/sensor/th-b/primitive/zoom", {})
        assert status == 409
        status, _, _ = request("POST", f"{base}/sensor/ghost/primitive/focus", {})
        assert status == 404

    def test_unregister_route(self, portal):
        base, _, _ = portal
        _, payload, _ = request("POST", f"{base}/register",
                                thermal_sensor_body("th-c"))
        token = json.loads(payload)["token"]
        assert request("DELETE", f"{base}/register/{token}")[0] == 200
        assert request("DELETE", f"{base}/register/{token}")[0] == 401

    def test_fleet_page_html(self, portal):
        base, _, _ = portal
        status, payload, headers = request("GET", f"{base}/")
        assert status == 200
        assert headers["Content-Type"].startswith("text/html")
        assert b"Acquisition fleet" in payload
        assert b"disk budget" in payload

    def test_fleet_reports_disk_budget(self, portal, monkeypatch):
        base, _, _ = portal
        status, doc = get_json(f"{base}/fleet")
        assert status == 200
        assert doc["disk_budget_bytes"] == 270e6
        assert doc["declared_aggregate_bytes"] > 0

    def test_disk_budget_env_override(self, tmp_path, monkeypatch):
        from railportal.service import env_disk_budget_bytes
        monkeypatch.setenv("GATE_DISK_BUDGET_MBPS", "300")
        assert env_disk_budget_bytes() == 300e6
        svc = PortalService(AcquisitionManager(clock=VirtualClock()), tmp_path)
        assert svc.disk_budget_bytes == 300e6


class TestSessionRoutes:
    def test_sessions_index(self, portal):
        base, _, sid = portal
        status, listing = get_json(f"{base}/sessions")
        assert status == 200
        assert [s["session_id"] for s in listing] == [sid]

    def test_manifest(self, portal):
        base, _, sid = portal
        status, doc = get_json(f"{base}/sessions/{sid}/manifest")
        assert status == 200
        assert doc["version"] == "SISS1"
        assert "side-low" in doc["streams"]

    def test_tile_bytes_match_disk(self, portal):
        base, _, sid = portal
        status, payload, headers = request(
            "GET", f"{base}/sessions/{sid}/tiles/side-low/0/0_0")
        assert status == 200
        assert headers["Content-Type"] == "image/x-portable-graymap"
        assert payload.startswith(b"P5\n256 256\n255\n")
        assert headers["Access-Control-Allow-Origin"] == "*"

    def test_color_preview_tile(self, portal):
        base, _, sid = portal
        status, payload, headers = request(
            "GET", f"{base}/sessions/{sid}/tiles/thermal-left/0/0_0")
        assert status == 200
        assert headers["Content-Type"] == "image/x-portable-pixmap"
        assert payload.startswith(b"P6\n")

    def test_tile_out_of_range_404(self, portal):
        base, _, sid = portal
        status, _, _ = request("GET",
                               f"{base}/sessions/{sid}/tiles/side-low/0/99_99")
        assert status == 404

    def test_thermal_raw(self, portal):
        base, _, sid = portal
        status, payload, _ = request("GET",
                                     f"{base}/sessions/{sid}/thermal/left/raw")
        assert status == 200
        assert payload.startswith(b"TMAP1\n")

    def test_detections_combined(self, portal):
        base, _, sid = portal
        status, doc = get_json(f"{base}/sessions/{sid}/detections")
        assert status == 200
        assert {"wagon_id", "pantograph", "thermal"} <= set(doc)

    def test_artifact_fetch(self, portal):
        base, _, sid = portal
        status, payload, _ = request(
            "GET", f"{base}/sessions/{sid}/files/frontal/frame_00000.pgm")
        assert status == 200 and payload.startswith(b"P5\n")

    def test_artifact_traversal_blocked(self, portal):
        base, _, sid = portal
        status, _, _ = request(
            "GET", f"{base}/sessions/{sid}/files/..%2F..%2Fother")
        assert status == 404

    def test_artifact_traversal_guard_direct(self, portal, tmp_path):
        from railportal.session import SessionFormatError
        _, mgr, sid = portal
        svc = PortalService(mgr, tmp_path)   # wrong root: also must not leak
        with pytest.raises(SessionFormatError):
            svc.artifact_bytes(sid, "../../etc/hosts")

    def test_unknown_session_404(self, portal):
        base, _, _ = portal
        assert request("GET", f"{base}/sessions/sXXX/manifest")[0] == 404

    def test_unknown_route_404(self, portal):
        base, _, _ = portal
        assert request("GET", f"{base}/nope")[0] == 404
