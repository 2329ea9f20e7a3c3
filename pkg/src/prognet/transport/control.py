"""JSON control API for steering progressive sessions from a browser.

Endpoints:
  GET  /inputs                  demo inputs {id, label, features}
  POST /session                 {server_url, input_id} -> {session_id}
  GET  /session/{id}            state snapshot
  POST /session/{id}/pause      |
  POST /session/{id}/resume     | state machine transitions
  POST /session/{id}/stop       |
  POST /session/{id}/choice     {label} manual pick; stops a live session

All responses carry permissive CORS headers so a static frontend served
from another origin can call them directly.
"""

from __future__ import annotations

import json
import logging
import threading
import uuid
from dataclasses import dataclass
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import numpy as np

from ..core import Tensor
from ..engine import DemoConfig, make_dataset
from ..errors import SessionStateError, TransportError
from .session import ProgressiveSession, SessionState

log = logging.getLogger("prognet.control")


@dataclass(frozen=True)
class DemoInput:
    input_id: str
    label: str
    features: tuple[float, ...]

    def to_json(self) -> dict:
        return {"id": self.input_id, "label": self.label,
                "features": list(self.features)}

    def tensor(self) -> Tensor:
        return Tensor((len(self.features),),
                      np.array(self.features, dtype=np.float32))


def demo_inputs(seed: int = 0, count: int = 12,
                config: DemoConfig = DemoConfig()) -> list[DemoInput]:
    """Deterministic gallery drawn from the demo dataset's held-out split."""
    _, test = make_dataset(seed, config)
    count = min(count, len(test))
    inputs = []
    for i in range(count):
        tensor, label = test.sample(i)
        inputs.append(DemoInput(
            input_id=f"input-{i:02d}",
            label=f"class {label}",
            features=tuple(float(v) for v in tensor.data)))
    return inputs


def state_to_json(state: SessionState, choice: dict | None = None) -> dict:
    return {
        "session_id": state.session_id,
        "status": state.status,
        "stages_received": state.stages_received,
        "stages_total": state.stages_total,
        "bytes_received": state.bytes_received,
        "elapsed_s": round(state.elapsed_s, 6),
        "timings": [t.to_json() for t in state.timings],
        "results": [{
            "stage": r.stage,
            "bits": r.bits,
            "class_index": r.prediction.class_index,
            "confidence": round(r.prediction.confidence, 6),
            "probabilities": [round(float(p), 6)
                              for p in r.prediction.probabilities],
            "elapsed_s": round(r.timing.infer_end, 6),
        } for r in state.results],
        "error": state.error,
        "choice": choice,
    }


class _SessionEntry:
    def __init__(self, session: ProgressiveSession):
        self.session = session
        self.choice: dict | None = None


class _ControlHandler(BaseHTTPRequestHandler):
    server: "ControlServer"

    # -- plumbing -----------------------------------------------------------

    def _send_json(self, status: int, payload: dict) -> None:
        body = json.dumps(payload).encode()
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(body)))
        self._send_cors()
        self.end_headers()
        self.wfile.write(body)

    def _send_cors(self) -> None:
        self.send_header("Access-Control-Allow-Origin", "*")
        self.send_header("Access-Control-Allow-Methods",
                         "GET, POST, OPTIONS")
        self.send_header("Access-Control-Allow-Headers", "Content-Type")

    def _read_body(self) -> dict:
        length = int(self.headers.get("Content-Length") or 0)
        if length == 0:
            return {}
        try:
            return json.loads(self.rfile.read(length).decode())
        except ValueError:
            return {}

    def log_message(self, fmt, *args):
        log.debug("%s %s", self.address_string(), fmt % args)

    # -- routing --------------------------------------------------------------

    def do_OPTIONS(self):  # noqa: N802 (http.server API)
        self.send_response(204)
        self._send_cors()
        self.send_header("Content-Length", "0")
        self.end_headers()

    def do_GET(self):  # noqa: N802
        if self.path == "/inputs":
            self._send_json(200, {"inputs": [
                i.to_json() for i in self.server.inputs]})
            return
        if self.path.startswith("/session/"):
            entry = self.server.entry_for(self.path[len("/session/"):])
            if entry is None:
                self._send_json(404, {"error": "unknown session"})
                return
            self._send_json(200, state_to_json(entry.session.state(),
                                               entry.choice))
            return
        self._send_json(404, {"error": f"no resource at {self.path}"})

    def do_POST(self):  # noqa: N802
        if self.path == "/session":
            self._create_session()
            return
        parts = self.path.strip("/").split("/")
        if len(parts) == 3 and parts[0] == "session":
            self._session_action(parts[1], parts[2])
            return
        self._send_json(404, {"error": f"no resource at {self.path}"})

    # -- handlers -------------------------------------------------------------

    def _create_session(self) -> None:
        body = self._read_body()
        server_url = body.get("server_url")
        input_id = body.get("input_id")
        if not server_url or not input_id:
            self._send_json(400,
                            {"error": "server_url and input_id required"})
            return
        found = [i for i in self.server.inputs if i.input_id == input_id]
        if not found:
            self._send_json(400, {"error": f"unknown input {input_id!r}"})
            return
        try:
            session = ProgressiveSession(
                server_url, found[0].tensor(),
                session_id=uuid.uuid4().hex[:12]).start()
        except TransportError as exc:
            self._send_json(400, {"error": str(exc)})
            return
        self.server.register(session)
        self._send_json(201, {"session_id": session.session_id})

    def _session_action(self, session_id: str, action: str) -> None:
        entry = self.server.entry_for(session_id)
        if entry is None:
            self._send_json(404, {"error": "unknown session"})
            return
        session = entry.session
        if action == "choice":
            body = self._read_body()
            label = body.get("label")
            if not label:
                self._send_json(400, {"error": "label required"})
                return
            status = session.state().status
            entry.choice = {"label": label,
                            "while_transmitting": status == "downloading"}
            try:
                session.stop()
            except SessionStateError:
                pass  # already finished; the choice is still recorded
            self._send_json(200, state_to_json(session.state(),
                                               entry.choice))
            return
        try:
            if action == "pause":
                session.pause()
            elif action == "resume":
                session.resume()
            elif action == "stop":
                session.stop()
            else:
                self._send_json(404, {"error": f"unknown action {action!r}"})
                return
        except SessionStateError as exc:
            self._send_json(409, {"error": str(exc)})
            return
        self._send_json(200, state_to_json(session.state(), entry.choice))


class ControlServer(ThreadingHTTPServer):
    daemon_threads = True
    allow_reuse_address = True

    def __init__(self, address=("127.0.0.1", 0), *, seed: int = 0,
                 input_count: int = 12,
                 config: DemoConfig = DemoConfig()):
        super().__init__(address, _ControlHandler)
        self.inputs = demo_inputs(seed, input_count, config)
        self._entries: dict[str, _SessionEntry] = {}
        self._lock = threading.Lock()
        self._thread: threading.Thread | None = None

    def register(self, session: ProgressiveSession) -> None:
        with self._lock:
            self._entries[session.session_id] = _SessionEntry(session)

    def entry_for(self, session_id: str) -> _SessionEntry | None:
        with self._lock:
            return self._entries.get(session_id)

    @property
    def port(self) -> int:
        return self.server_address[1]

    @property
    def url(self) -> str:
        return f"http://{self.server_address[0]}:{self.port}"

    def start(self) -> "ControlServer":
        self._thread = threading.Thread(target=self.serve_forever,
                                        name="control-server", daemon=True)
        self._thread.start()
        log.info("control API at %s", self.url)
        return self

    def stop(self) -> None:
        with self._lock:
            entries = list(self._entries.values())
        for entry in entries:
            try:
                entry.session.stop()
            except SessionStateError:
                pass
        self.shutdown()
        self.server_close()
        if self._thread is not None:
            self._thread.join(timeout=5.0)

    def __enter__(self) -> "ControlServer":
        return self.start()

    def __exit__(self, *exc):
        self.stop()


def start_control_server(host="127.0.0.1", port=0, seed=0,
                         input_count=12) -> ControlServer:
    return ControlServer((host, port), seed=seed,
                         input_count=input_count).start()
