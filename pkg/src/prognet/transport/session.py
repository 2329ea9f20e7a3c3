"""Progressive download + inference sessions.

A session runs two threads: a downloader that fetches stage blobs in
order and a worker that reconstructs and infers, one stage at a time.
With concurrent scheduling the stage-m inference overlaps the
stage-(m+1) transfer; at most one download and at most one inference
are ever in flight, and inference never delays the next transfer.

Control calls (pause/resume/stop) may arrive from any thread and take
effect within one throttle tick, mid-transfer included. Stopping at a
stage boundary (e.g. from the on_stage_received callback) guarantees no
request for any later stage is ever issued.
"""

from __future__ import annotations

import http.client
import json
import logging
import queue
import threading
import time
import urllib.parse
import uuid
import zlib
from dataclasses import dataclass

from ..bundle import BundleManifest, ReconstructionState, decode_stage
from ..core import Tensor
from ..engine import Prediction, forward
from ..errors import (BundleError, ChecksumError, InferenceError,
                      SessionStateError, TransportError)

log = logging.getLogger("prognet.transport")

DOWNLOADING = "downloading"
PAUSED = "paused"
STOPPED = "stopped"
COMPLETE = "complete"

_READ_CHUNK = 16 * 1024


@dataclass(frozen=True)
class StageTiming:
    """Per-stage clock readings, in seconds since session start.

    Inference fields stay None until the worker has inferred the stage
    (or forever, if the session stops first).
    """
    stage: int
    transfer_start: float
    transfer_end: float
    infer_start: float | None = None
    infer_end: float | None = None

    def to_json(self) -> dict:
        return {"stage": self.stage,
                "transfer_start": round(self.transfer_start, 6),
                "transfer_end": round(self.transfer_end, 6),
                "infer_start": None if self.infer_start is None
                else round(self.infer_start, 6),
                "infer_end": None if self.infer_end is None
                else round(self.infer_end, 6)}


@dataclass(frozen=True)
class StageResult:
    stage: int
    bits: int
    prediction: Prediction
    timing: StageTiming


@dataclass(frozen=True)
class SessionState:
    """Consistent snapshot of a live session."""
    session_id: str
    status: str
    stages_received: int
    stages_total: int
    bytes_received: int
    elapsed_s: float
    timings: tuple[StageTiming, ...]
    results: tuple[StageResult, ...]
    error: str | None


def _parse_base_url(url: str) -> tuple[str, int]:
    parts = urllib.parse.urlsplit(url if "//" in url else "http://" + url)
    if parts.scheme not in ("", "http"):
        raise TransportError(f"only http:// URLs are supported, got {url!r}")
    if not parts.hostname:
        raise TransportError(f"no host in URL {url!r}")
    return parts.hostname, parts.port or 80


class _Fetcher:
    """Minimal chunked HTTP GET with pause/stop polling between reads."""

    def __init__(self, host: str, port: int, timeout_s: float,
                 tick_s: float = 0.005):
        self.host = host
        self.port = port
        self.timeout_s = timeout_s
        self.tick_s = tick_s

    def get(self, path: str, stop: threading.Event,
            pause: threading.Event, on_bytes=None) -> bytes | None:
        """Full response body, or None when stop interrupted the read."""
        conn = http.client.HTTPConnection(self.host, self.port,
                                          timeout=self.timeout_s)
        try:
            conn.request("GET", path, headers={"Connection": "close"})
            resp = conn.getresponse()
            if resp.status != 200:
                resp.read()
                raise TransportError(f"GET {path} returned {resp.status}")
            parts = []
            while True:
                if stop.is_set():
                    return None
                while pause.is_set() and not stop.is_set():
                    time.sleep(self.tick_s)
                chunk = resp.read(_READ_CHUNK)
                if not chunk:
                    break
                parts.append(chunk)
                if on_bytes is not None:
                    on_bytes(len(chunk))
            return b"".join(parts)
        finally:
            conn.close()


class ProgressiveSession:
    """One progressive transfer of a bundle with live inference.

    start() launches the downloader and worker threads; iter_results()
    yields StageResults as inferences complete. concurrent=False
    serializes the pipeline (stage-m inference finishes before the
    stage-(m+1) request is issued) for baseline comparisons.
    infer_delay_s adds artificial latency to every inference so timing
    experiments can model heavier networks.
    """

    def __init__(self, base_url: str, input_tensor: Tensor, *,
                 concurrent: bool = True, session_id: str | None = None,
                 infer_delay_s: float = 0.0, timeout_s: float = 60.0,
                 on_stage_received=None, on_result=None):
        self.session_id = session_id or uuid.uuid4().hex[:12]
        self._fetcher = _Fetcher(*_parse_base_url(base_url),
                                 timeout_s=timeout_s)
        self._input = input_tensor
        self._concurrent = concurrent
        self._infer_delay_s = infer_delay_s
        self._on_stage_received = on_stage_received
        self._on_result = on_result

        self._lock = threading.RLock()
        self._status = DOWNLOADING
        self._error: str | None = None
        self._error_cls: type[Exception] = TransportError
        self._stages_total = 0
        self._bytes = 0
        self._timings: dict[int, StageTiming] = {}
        self._results: list[StageResult] = []

        self._stop = threading.Event()
        self._pause = threading.Event()
        self._queue: queue.Queue = queue.Queue()
        self._inferred = threading.Semaphore(0)  # one release per queue item
        self._t0 = 0.0
        self._downloader: threading.Thread | None = None
        self._worker: threading.Thread | None = None

    # -- control ------------------------------------------------------------

    def start(self) -> "ProgressiveSession":
        if self._downloader is not None:
            raise SessionStateError("session already started")
        self._t0 = time.monotonic()
        self._downloader = threading.Thread(
            target=self._download_loop, name=f"dl-{self.session_id}",
            daemon=True)
        self._worker = threading.Thread(
            target=self._worker_loop, name=f"infer-{self.session_id}",
            daemon=True)
        self._downloader.start()
        self._worker.start()
        return self

    def pause(self) -> None:
        with self._lock:
            if self._status != DOWNLOADING:
                raise SessionStateError(
                    f"cannot pause a {self._status} session")
            self._status = PAUSED
            self._pause.set()

    def resume(self) -> None:
        with self._lock:
            if self._status != PAUSED:
                raise SessionStateError(
                    f"cannot resume a {self._status} session")
            self._status = DOWNLOADING
            self._pause.clear()

    def stop(self) -> None:
        with self._lock:
            if self._status not in (DOWNLOADING, PAUSED):
                raise SessionStateError(
                    f"cannot stop a {self._status} session")
            self._status = STOPPED
            self._stop.set()
            self._pause.clear()

    def join(self, timeout: float | None = None) -> None:
        for t in (self._downloader, self._worker):
            if t is not None:
                t.join(timeout)

    # -- observation ----------------------------------------------------------

    def _now(self) -> float:
        return time.monotonic() - self._t0

    def state(self) -> SessionState:
        with self._lock:
            return SessionState(
                session_id=self.session_id,
                status=self._status,
                stages_received=len(self._timings),
                stages_total=self._stages_total,
                bytes_received=self._bytes,
                elapsed_s=self._now(),
                timings=tuple(self._timings[m]
                              for m in sorted(self._timings)),
                results=tuple(self._results),
                error=self._error)

    def iter_results(self, poll_s: float = 0.005):
        """Yield StageResults in completion order until the session ends.

        Raises the session's error (as TransportError or InferenceError)
        after draining any results that preceded it.
        """
        seen = 0
        while True:
            state = self.state()
            while seen < len(state.results):
                yield state.results[seen]
                seen += 1
            if state.status in (STOPPED, COMPLETE) and not self._alive():
                state = self.state()
                while seen < len(state.results):
                    yield state.results[seen]
                    seen += 1
                if state.error is not None:
                    raise self._error_cls(state.error)
                return
            time.sleep(poll_s)

    def run(self) -> list[StageResult]:
        """start + drain + join, for callers without mid-flight control."""
        self.start()
        try:
            return list(self.iter_results())
        finally:
            self.join(timeout=10.0)

    def _alive(self) -> bool:
        return any(t is not None and t.is_alive()
                   for t in (self._downloader, self._worker))

    # -- internals ------------------------------------------------------------

    def _fail(self, message: str,
              error_cls: type[Exception] = TransportError) -> None:
        with self._lock:
            if self._error is None:
                self._error = message
                self._error_cls = error_cls
            if self._status in (DOWNLOADING, PAUSED):
                self._status = STOPPED
            self._stop.set()
            self._pause.clear()
        log.warning("session %s failed: %s", self.session_id, message)

    def _count_bytes(self, n: int) -> None:
        with self._lock:
            self._bytes += n

    def _fetch_stage(self, manifest: BundleManifest, stage: int) -> bytes | None:
        """Download and CRC-check one stage, re-fetching once on mismatch."""
        record = manifest.stages[stage - 1]
        for attempt in (1, 2):
            blob = self._fetcher.get(f"/stage/{stage}", self._stop,
                                     self._pause, self._count_bytes)
            if blob is None:
                return None
            if len(blob) == record.byte_length and \
                    zlib.crc32(blob) == record.crc32:
                return blob
            log.warning("stage %d checksum mismatch (attempt %d)",
                        stage, attempt)
        raise ChecksumError(f"stage {stage} failed verification twice")

    def _download_loop(self) -> None:
        try:
            raw = self._fetcher.get("/manifest", self._stop, self._pause,
                                    self._count_bytes)
            if raw is None:
                return
            manifest = BundleManifest.from_json(raw.decode())
            with self._lock:
                self._stages_total = manifest.schedule.n_stages
            self._queue.put(manifest)

            for stage in range(1, manifest.schedule.n_stages + 1):
                if self._stop.is_set():
                    break
                t_start = self._now()
                blob = self._fetch_stage(manifest, stage)
                if blob is None:  # stopped mid-transfer
                    break
                timing = StageTiming(stage=stage, transfer_start=t_start,
                                     transfer_end=self._now())
                with self._lock:
                    self._timings[stage] = timing
                self._queue.put((stage, blob, timing))
                if self._on_stage_received is not None:
                    # synchronous: a stop() here precedes any later request
                    self._on_stage_received(stage)
                if not self._concurrent:
                    self._inferred.acquire()
        except ChecksumError as exc:
            self._fail(str(exc), ChecksumError)
        except (TransportError, OSError, ValueError, BundleError) as exc:
            self._fail(f"transfer failed: {exc}")
        finally:
            self._queue.put(None)

    def _worker_loop(self) -> None:
        manifest = self._queue.get()
        if manifest is None:
            return
        recon = ReconstructionState(manifest)
        stage = 0
        try:
            while True:
                item = self._queue.get()
                if item is None:
                    break
                stage, blob, timing = item
                recon.apply_stage(stage,
                                  decode_stage(manifest, stage, blob))
                self._infer_stage(manifest, recon, stage, timing)
                if not self._concurrent:
                    self._inferred.release()
            with self._lock:
                if self._status == DOWNLOADING and \
                        len(self._timings) == self._stages_total:
                    self._status = COMPLETE
                elif self._status == DOWNLOADING:
                    # transfer errored out; _fail already ran
                    self._status = STOPPED
        except (BundleError, TransportError, SessionStateError) as exc:
            self._fail(f"reconstruction failed: {exc}")
            self._inferred.release()
        except InferenceError as exc:
            self._fail(f"stage {stage} inference failed: {exc}",
                       InferenceError)
            self._inferred.release()

    def _infer_stage(self, manifest: BundleManifest,
                     recon: ReconstructionState, stage: int,
                     timing: StageTiming) -> None:
        infer_start = self._now()
        weights = recon.materialize()
        prediction = forward(manifest.model, weights, self._input)
        if self._infer_delay_s > 0:
            time.sleep(self._infer_delay_s)
        full = StageTiming(stage=stage,
                           transfer_start=timing.transfer_start,
                           transfer_end=timing.transfer_end,
                           infer_start=infer_start,
                           infer_end=self._now())
        result = StageResult(stage=stage,
                             bits=manifest.schedule.prefix_bits(stage),
                             prediction=prediction, timing=full)
        with self._lock:
            self._timings[stage] = full
            self._results.append(result)
        if self._on_result is not None:
            self._on_result(result)


@dataclass(frozen=True)
class SingletonResult:
    prediction: Prediction
    total_s: float
    transfer_s: float
    bytes_received: int


def singleton_session(base_url: str, input_tensor: Tensor, *,
                      infer_delay_s: float = 0.0,
                      timeout_s: float = 60.0) -> SingletonResult:
    """Baseline: download the whole payload, reconstruct once, infer once."""
    fetcher = _Fetcher(*_parse_base_url(base_url), timeout_s=timeout_s)
    never_stop = threading.Event()
    never_pause = threading.Event()
    t0 = time.monotonic()
    raw = fetcher.get("/manifest", never_stop, never_pause)
    manifest = BundleManifest.from_json(raw.decode())
    payload = fetcher.get("/weights-singleton", never_stop, never_pause)
    transfer_s = time.monotonic() - t0

    recon = ReconstructionState(manifest)
    offset = 0
    for record in manifest.stages:
        blob = payload[offset:offset + record.byte_length]
        offset += record.byte_length
        recon.apply_stage(record.stage,
                          decode_stage(manifest, record.stage, blob))
    if offset != len(payload):
        raise TransportError(f"singleton payload has {len(payload)} bytes, "
                             f"expected {offset}")
    prediction = forward(manifest.model, recon.materialize(), input_tensor)
    if infer_delay_s > 0:
        time.sleep(infer_delay_s)
    return SingletonResult(prediction=prediction,
                           total_s=time.monotonic() - t0,
                           transfer_s=transfer_s,
                           bytes_received=len(raw) + len(payload))
