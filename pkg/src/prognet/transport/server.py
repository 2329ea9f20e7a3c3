"""Threaded HTTP server for bundle directories.

Answers GET /manifest, GET /stage/{m} and GET /weights-singleton with
exact payload bytes, rate-limited per connection, and keeps a request
log (path, bytes, duration) that stop-semantics tests can assert on.
"""

from __future__ import annotations

import json
import logging
import threading
import time
from dataclasses import dataclass
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path

from ..bundle import Bundle, read_bundle
from .throttle import ThrottleConfig, paced_send

log = logging.getLogger("prognet.transport")


@dataclass(frozen=True)
class RequestRecord:
    ts: float            # seconds since server start
    path: str
    bytes_sent: int
    duration_ms: float
    completed: bool

    def to_json(self) -> dict:
        return {"ts": round(self.ts, 6), "path": self.path,
                "bytes": self.bytes_sent,
                "duration_ms": round(self.duration_ms, 3),
                "completed": self.completed}


class RequestLog:
    """Append-only, thread-safe request history with optional JSONL sink."""

    def __init__(self, jsonl_path=None):
        self._records: list[RequestRecord] = []
        self._lock = threading.Lock()
        self._path = Path(jsonl_path) if jsonl_path else None
        if self._path:
            self._path.write_text("")

    def append(self, record: RequestRecord) -> None:
        with self._lock:
            self._records.append(record)
            if self._path:
                with self._path.open("a") as fh:
                    fh.write(json.dumps(record.to_json()) + "\n")

    def records(self) -> list[RequestRecord]:
        """Records ordered by request arrival. Appends happen at response
        completion, which can interleave under thread scheduling, so the
        in-memory list is re-sorted by the entry timestamp."""
        with self._lock:
            return sorted(self._records, key=lambda r: r.ts)

    def wait_count(self, n: int, timeout_s: float = 5.0) -> bool:
        """Block until at least n requests are logged. Records land just
        after the response bytes, so observers poll."""
        deadline = time.monotonic() + timeout_s
        while True:
            with self._lock:
                if len(self._records) >= n:
                    return True
            if time.monotonic() >= deadline:
                return False
            time.sleep(0.005)

    def paths(self) -> list[str]:
        return [r.path for r in self.records()]

    def stage_numbers(self) -> list[int]:
        """Stage indices requested so far, in request order."""
        out = []
        for p in self.paths():
            if p.startswith("/stage/"):
                out.append(int(p.rsplit("/", 1)[1]))
        return out


class _BundleHandler(BaseHTTPRequestHandler):
    server: "BundleServer"

    def do_GET(self):  # noqa: N802 (http.server API)
        started = time.monotonic()
        found = self.server.payload_for(self.path)
        if found is None:
            self.send_error(404, explain=f"no resource at {self.path}")
            self.server.request_log.append(RequestRecord(
                ts=started - self.server.started_at, path=self.path,
                bytes_sent=0, duration_ms=0.0, completed=False))
            return
        payload, content_type = found
        sent = 0
        completed = False
        try:
            self.send_response(200)
            self.send_header("Content-Type", content_type)
            self.send_header("Content-Length", str(len(payload)))
            self.send_header("Connection", "close")
            self.end_headers()
            sent = paced_send(self.wfile.write, payload,
                              self.server.throttle)
            self.wfile.flush()
            completed = sent == len(payload)
        except (BrokenPipeError, ConnectionResetError):
            pass  # client went away mid-send; log as incomplete
        finally:
            self.server.request_log.append(RequestRecord(
                ts=started - self.server.started_at, path=self.path,
                bytes_sent=sent,
                duration_ms=(time.monotonic() - started) * 1000.0,
                completed=completed))

    def log_message(self, fmt, *args):
        log.debug("%s %s", self.address_string(), fmt % args)


class BundleServer(ThreadingHTTPServer):
    daemon_threads = True
    allow_reuse_address = True

    def __init__(self, bundle: Bundle, address=("127.0.0.1", 0),
                 throttle: ThrottleConfig = ThrottleConfig(),
                 request_log: RequestLog | None = None):
        super().__init__(address, _BundleHandler)
        self.bundle = bundle
        self.throttle = throttle
        self.request_log = request_log if request_log is not None else RequestLog()
        self.started_at = time.monotonic()
        self._manifest_bytes = bundle.manifest.to_json().encode()
        self._singleton = bundle.singleton_payload()
        self._thread: threading.Thread | None = None

    def payload_for(self, path: str) -> tuple[bytes, str] | None:
        """Resolve a request path to (payload, content-type)."""
        if path == "/manifest":
            return self._manifest_bytes, "application/json"
        if path == "/weights-singleton":
            return self._singleton, "application/octet-stream"
        if path.startswith("/stage/"):
            try:
                stage = int(path[len("/stage/"):])
            except ValueError:
                return None
            if not 1 <= stage <= len(self.bundle.blobs):
                return None
            return self.bundle.blobs[stage - 1], "application/octet-stream"
        return None

    @property
    def port(self) -> int:
        return self.server_address[1]

    @property
    def url(self) -> str:
        return f"http://{self.server_address[0]}:{self.port}"

    def start(self) -> "BundleServer":
        self._thread = threading.Thread(target=self.serve_forever,
                                        name="bundle-server", daemon=True)
        self._thread.start()
        log.info("serving bundle at %s (rate=%s B/s)", self.url,
                 self.throttle.rate or "unlimited")
        return self

    def stop(self) -> None:
        self.shutdown()
        self.server_close()
        if self._thread is not None:
            self._thread.join(timeout=5.0)

    def __enter__(self) -> "BundleServer":
        return self.start()

    def __exit__(self, *exc):
        self.stop()


def serve_bundle(bundle_or_dir, host="127.0.0.1", port=0, rate=0.0,
                 tick_ms=20.0, log_path=None) -> BundleServer:
    """Build (but do not start) a server for a Bundle or a bundle directory."""
    if isinstance(bundle_or_dir, (str, Path)):
        bundle = read_bundle(bundle_or_dir)
    else:
        bundle = bundle_or_dir
    return BundleServer(bundle, (host, port),
                        ThrottleConfig(rate=rate, tick_ms=tick_ms),
                        RequestLog(log_path))
