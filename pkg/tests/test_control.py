import http.client
import json
import time

import pytest

from prognet.bitcodec import BitSchedule
from prognet.bundle import encode_bundle
from prognet.engine import DemoConfig, train_demo
from prognet.transport import BundleServer, ControlServer, ThrottleConfig

CFG = DemoConfig(samples=400, epochs=6, target_accuracy=0.0)


@pytest.fixture(scope="module")
def demo_bundle():
    spec, weights, _, _ = train_demo(seed=0, config=CFG)
    return encode_bundle(spec, weights, bits=8,
                         schedule=BitSchedule.parse("2,4,8", 8))


def request(server, method, path, body=None):
    conn = http.client.HTTPConnection("127.0.0.1", server.port, timeout=10)
    try:
        payload = json.dumps(body).encode() if body is not None else None
        headers = {"Content-Type": "application/json"} if payload else {}
        conn.request(method, path, body=payload, headers=headers)
        resp = conn.getresponse()
        return resp.status, json.loads(resp.read().decode() or "{}")
    finally:
        conn.close()


def wait_status(control, session_id, wanted, timeout=10.0):
    deadline = time.monotonic() + timeout
    while time.monotonic() < deadline:
        _, state = request(control, "GET", f"/session/{session_id}")
        if state["status"] in wanted:
            return state
        time.sleep(0.02)
    raise AssertionError(f"session never reached {wanted}, last: {state}")


@pytest.fixture()
def stack(demo_bundle):
    with BundleServer(demo_bundle) as bundle_server:
        with ControlServer(seed=0, input_count=4, config=CFG) as control:
            yield bundle_server, control


@pytest.fixture()
def slow_stack(demo_bundle):
    # ~19 KB of stages at 40 KB/s leaves ~0.5 s to steer mid-transfer
    throttle = ThrottleConfig(rate=40_000)
    with BundleServer(demo_bundle, throttle=throttle) as bundle_server:
        with ControlServer(seed=0, input_count=4, config=CFG) as control:
            yield bundle_server, control


def start_session(bundle_server, control, input_id="input-00"):
    status, body = request(control, "POST", "/session",
                           {"server_url": bundle_server.url,
                            "input_id": input_id})
    assert status == 201, body
    return body["session_id"]


class TestInputs:
    def test_gallery_is_well_formed(self, stack):
        _, control = stack
        status, body = request(control, "GET", "/inputs")
        assert status == 200
        inputs = body["inputs"]
        assert len(inputs) == 4
        for item in inputs:
            assert set(item) == {"id", "label", "features"}
            assert len(item["features"]) == CFG.input_dim
            assert item["label"].startswith("class ")

    def test_gallery_is_deterministic(self, stack):
        _, control = stack
        _, a = request(control, "GET", "/inputs")
        _, b = request(control, "GET", "/inputs")
        assert a == b


class TestSessionLifecycle:
    def test_full_run_reports_all_stages(self, stack):
        bundle_server, control = stack
        sid = start_session(bundle_server, control)
        state = wait_status(control, sid, {"complete"})
        assert state["stages_received"] == state["stages_total"] == 3
        assert [r["stage"] for r in state["results"]] == [1, 2, 3]
        assert [r["bits"] for r in state["results"]] == [2, 4, 8]
        for r in state["results"]:
            assert 0 <= r["class_index"] < CFG.num_classes
            assert 0 < r["confidence"] <= 1
            assert len(r["probabilities"]) == CFG.num_classes
        assert state["error"] is None

    def test_missing_fields_rejected(self, stack):
        bundle_server, control = stack
        status, body = request(control, "POST", "/session",
                               {"server_url": bundle_server.url})
        assert status == 400 and "input_id" in body["error"]

    def test_unknown_input_rejected(self, stack):
        bundle_server, control = stack
        status, body = request(control, "POST", "/session",
                               {"server_url": bundle_server.url,
                                "input_id": "input-99"})
        assert status == 400 and "input-99" in body["error"]

    def test_unknown_session_is_404(self, stack):
        _, control = stack
        assert request(control, "GET", "/session/nope")[0] == 404
        assert request(control, "POST", "/session/nope/stop")[0] == 404

    def test_unknown_action_is_404(self, stack):
        bundle_server, control = stack
        sid = start_session(bundle_server, control)
        assert request(control, "POST", f"/session/{sid}/fling")[0] == 404
        wait_status(control, sid, {"complete"})


class TestSteering:
    def test_pause_resume_stop_round_trip(self, slow_stack):
        bundle_server, control = slow_stack
        sid = start_session(bundle_server, control)
        status, state = request(control, "POST", f"/session/{sid}/pause")
        assert status == 200 and state["status"] == "paused"
        status, state = request(control, "POST", f"/session/{sid}/resume")
        assert status == 200 and state["status"] == "downloading"
        status, state = request(control, "POST", f"/session/{sid}/stop")
        assert status == 200 and state["status"] == "stopped"

    def test_stop_then_resume_is_conflict(self, slow_stack):
        bundle_server, control = slow_stack
        sid = start_session(bundle_server, control)
        request(control, "POST", f"/session/{sid}/stop")
        status, body = request(control, "POST", f"/session/{sid}/resume")
        assert status == 409 and "cannot resume" in body["error"]

    def test_pause_while_paused_is_conflict(self, slow_stack):
        bundle_server, control = slow_stack
        sid = start_session(bundle_server, control)
        request(control, "POST", f"/session/{sid}/pause")
        status, body = request(control, "POST", f"/session/{sid}/pause")
        assert status == 409 and "cannot pause" in body["error"]
        request(control, "POST", f"/session/{sid}/stop")

    def test_stop_halts_fragment_requests(self, slow_stack):
        bundle_server, control = slow_stack
        sid = start_session(bundle_server, control)
        deadline = time.monotonic() + 10
        while time.monotonic() < deadline:
            state = request(control, "GET", f"/session/{sid}")[1]
            if state["stages_received"] >= 1:
                break
            time.sleep(0.02)
        assert state["stages_received"] >= 1
        request(control, "POST", f"/session/{sid}/stop")
        wait_status(control, sid, {"stopped"})
        time.sleep(0.3)
        before = bundle_server.request_log.stage_numbers()
        time.sleep(0.3)
        after = bundle_server.request_log.stage_numbers()
        assert after == before  # no new fragment requests after stop


class TestManualChoice:
    def test_choice_mid_transfer_stops_and_records(self, slow_stack):
        bundle_server, control = slow_stack
        sid = start_session(bundle_server, control)
        status, state = request(control, "POST", f"/session/{sid}/choice",
                                {"label": "class 5"})
        assert status == 200
        assert state["choice"] == {"label": "class 5",
                                   "while_transmitting": True}
        assert state["status"] == "stopped"

    def test_choice_after_completion_keeps_status(self, stack):
        bundle_server, control = stack
        sid = start_session(bundle_server, control)
        wait_status(control, sid, {"complete"})
        status, state = request(control, "POST", f"/session/{sid}/choice",
                                {"label": "class 2"})
        assert status == 200
        assert state["choice"]["while_transmitting"] is False
        assert state["status"] == "complete"

    def test_choice_requires_label(self, slow_stack):
        bundle_server, control = slow_stack
        sid = start_session(bundle_server, control)
        status, body = request(control, "POST", f"/session/{sid}/choice", {})
        assert status == 400 and "label" in body["error"]
        request(control, "POST", f"/session/{sid}/stop")


class TestCors:
    def test_preflight_and_headers(self, stack):
        _, control = stack
        conn = http.client.HTTPConnection("127.0.0.1", control.port,
                                          timeout=10)
        try:
            conn.request("OPTIONS", "/session",
                         headers={"Origin": "http://localhost:5173"})
            resp = conn.getresponse()
            resp.read()
            assert resp.status == 204
            assert resp.headers["Access-Control-Allow-Origin"] == "*"
            assert "POST" in resp.headers["Access-Control-Allow-Methods"]
        finally:
            conn.close()

    def test_get_carries_cors_header(self, stack):
        _, control = stack
        conn = http.client.HTTPConnection("127.0.0.1", control.port,
                                          timeout=10)
        try:
            conn.request("GET", "/inputs")
            resp = conn.getresponse()
            resp.read()
            assert resp.headers["Access-Control-Allow-Origin"] == "*"
        finally:
            conn.close()
