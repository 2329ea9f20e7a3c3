"""Deadline-based bandwidth pacing for socket writes.

A writer sends one bucket's worth of bytes per tick and sleeps until the
wall-clock deadline for the bytes sent so far, so delivered throughput
converges on the configured rate regardless of scheduler jitter.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

from ..errors import TransportError

# chunk size when no rate limit applies
_UNLIMITED_CHUNK = 64 * 1024


@dataclass(frozen=True)
class ThrottleConfig:
    """rate: bytes per second, 0 disables throttling; tick_ms: refill
    granularity (also the latency bound for abort checks)."""
    rate: float = 0.0
    tick_ms: float = 20.0

    def __post_init__(self):
        if self.rate < 0:
            raise TransportError(f"rate must be >= 0, got {self.rate}")
        if self.tick_ms <= 0:
            raise TransportError(f"tick_ms must be > 0, got {self.tick_ms}")

    @property
    def tick_s(self) -> float:
        return self.tick_ms / 1000.0

    def chunk_size(self) -> int:
        if self.rate <= 0:
            return _UNLIMITED_CHUNK
        return max(1, int(self.rate * self.tick_s))


def paced_send(write, payload: bytes, config: ThrottleConfig,
               should_abort=None) -> int:
    """Push payload through `write` at the configured rate.

    After n bytes the elapsed time is at least n/rate (enforced between
    chunks; the final chunk is not followed by a sleep). `should_abort`
    is polled once per tick; returns the byte count actually written.
    """
    view = memoryview(payload)
    total = len(view)
    chunk = config.chunk_size()
    start = time.monotonic()
    sent = 0
    while sent < total:
        if should_abort is not None and should_abort():
            break
        piece = view[sent:sent + chunk]
        write(piece)
        sent += len(piece)
        if config.rate > 0 and sent < total:
            delay = start + sent / config.rate - time.monotonic()
            if delay > 0:
                time.sleep(delay)
    return sent
