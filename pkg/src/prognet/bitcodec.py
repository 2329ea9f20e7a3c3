"""Lossless splitting of k-bit codes into MSB-first fragments and back.

A schedule lists cumulative bit positions b1 < b2 < ... < bn = k measured
from the most significant bit; stage m carries the bit-field [b_{m-1}, b_m)
of every code. OR-ing fragments back into place reproduces the code
exactly, and any prefix of stages yields the code with its low bits zero.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ScheduleError
from .quantize import MAX_BITS, QuantizedTensor


@dataclass(frozen=True)
class BitSchedule:
    """Cumulative MSB offsets; positions[-1] == bits."""

    bits: int
    positions: tuple[int, ...]

    def __post_init__(self):
        if not 1 <= self.bits <= MAX_BITS:
            raise ScheduleError(f"total bits must be in [1, {MAX_BITS}], "
                                f"got {self.bits}")
        pos = tuple(int(p) for p in self.positions)
        if len(pos) == 0:
            raise ScheduleError("schedule has no stages")
        if pos[0] < 1 or any(b >= a for a, b in zip(pos[1:], pos)):
            raise ScheduleError(f"positions must be strictly increasing "
                                f"and start at >= 1, got {pos}")
        if pos[-1] != self.bits:
            raise ScheduleError(f"last position must equal bits "
                                f"({self.bits}), got {pos[-1]}")
        object.__setattr__(self, "positions", pos)

    @property
    def n_stages(self) -> int:
        return len(self.positions)

    def prefix_bits(self, stage: int) -> int:
        """Cumulative bits delivered once stages 1..stage arrived."""
        self._check_stage(stage)
        return self.positions[stage - 1]

    def width(self, stage: int) -> int:
        """Bits per element carried by the given 1-based stage."""
        self._check_stage(stage)
        prev = self.positions[stage - 2] if stage > 1 else 0
        return self.positions[stage - 1] - prev

    def widths(self) -> tuple[int, ...]:
        return tuple(self.width(m) for m in range(1, self.n_stages + 1))

    def _check_stage(self, stage: int) -> None:
        if not 1 <= stage <= self.n_stages:
            raise ScheduleError(f"stage {stage} out of range "
                                f"[1, {self.n_stages}]")

    @classmethod
    def parse(cls, text: str, bits: int) -> "BitSchedule":
        """Parse a comma-separated cumulative position list like "2,4,...,16"."""
        try:
            positions = tuple(int(p.strip()) for p in text.split(","))
        except ValueError as exc:
            raise ScheduleError(f"cannot parse schedule {text!r}") from exc
        return cls(bits, positions)

    @classmethod
    def default(cls, bits: int = MAX_BITS) -> "BitSchedule":
        """Two-bits-per-stage ladder: 2, 4, ..., bits (single stage for bits 1)."""
        if bits <= 2:
            return cls(bits, (bits,))
        positions = list(range(2, bits + 1, 2))
        if positions[-1] != bits:
            positions.append(bits)
        return cls(bits, tuple(positions))


@dataclass(frozen=True)
class FragmentPlane:
    """One stage's bit-field for every element of a tensor, MSB-aligned."""

    stage: int
    width: int
    values: np.ndarray

    def __post_init__(self):
        values = np.ascontiguousarray(self.values, dtype=np.uint32).reshape(-1)
        if values.size and int(values.max()) >= 1 << self.width:
            raise ScheduleError(
                f"fragment value exceeds width {self.width} at stage {self.stage}")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)


# ---------------------------------------------------------------------------
# Scalar operations
# ---------------------------------------------------------------------------

def divide(code: int, sched: BitSchedule, stage: int) -> int:
    """Extract the stage-th MSB-first bit-field of a k-bit code.

    Computed as a left shift in a k-bit register (high bits discarded)
    followed by an unsigned right shift, which isolates the bits between
    cumulative positions b_{m-1} and b_m.
    """
    k = sched.bits
    if not 0 <= code < 1 << k:
        raise ScheduleError(f"code {code} out of range for {k} bits")
    hi = sched.prefix_bits(stage)
    lo = sched.positions[stage - 2] if stage > 1 else 0
    shifted = (code << lo) & ((1 << k) - 1)
    return shifted >> (k - hi + lo)


def concatenate(fragments, sched: BitSchedule) -> int:
    """OR the first m fragments into their MSB-aligned code positions."""
    if not 1 <= len(fragments) <= sched.n_stages:
        raise ScheduleError(f"expected 1..{sched.n_stages} fragments, "
                            f"got {len(fragments)}")
    code = 0
    for m, frag in enumerate(fragments, start=1):
        code = accumulate(code, frag, sched, m)
    return code


def accumulate(code: int, fragment: int, sched: BitSchedule, stage: int) -> int:
    """Incremental concatenate: place one new fragment into the code."""
    w = sched.width(stage)
    if not 0 <= fragment < 1 << w:
        raise ScheduleError(
            f"fragment {fragment} exceeds width {w} at stage {stage}")
    return code | (fragment << (sched.bits - sched.prefix_bits(stage)))


# ---------------------------------------------------------------------------
# Elementwise lifts over code arrays
# ---------------------------------------------------------------------------

def divide_tensor(q: QuantizedTensor, sched: BitSchedule, stage: int) -> FragmentPlane:
    """Slice one fragment plane out of every code of a quantized tensor."""
    if sched.bits != q.bits:
        raise ScheduleError(f"schedule is for {sched.bits}-bit codes, "
                            f"tensor has {q.bits}")
    values = divide_codes(q.codes, sched, stage)
    return FragmentPlane(stage=stage, width=sched.width(stage), values=values)


def divide_codes(codes: np.ndarray, sched: BitSchedule, stage: int) -> np.ndarray:
    hi = sched.prefix_bits(stage)
    w = sched.width(stage)
    mask = np.uint32((1 << w) - 1)
    return ((codes >> np.uint32(sched.bits - hi)) & mask).astype(np.uint32)


def accumulate_codes(codes: np.ndarray, plane: FragmentPlane,
                     sched: BitSchedule, stage: int) -> np.ndarray:
    """Return a new code array with the stage's plane OR-ed into place."""
    if plane.width != sched.width(stage):
        raise ScheduleError(f"plane width {plane.width} does not match "
                            f"stage {stage} width {sched.width(stage)}")
    if plane.values.size != codes.size:
        raise ScheduleError("plane size does not match code array")
    shift = np.uint32(sched.bits - sched.prefix_bits(stage))
    return (codes | (plane.values << shift)).astype(np.uint32)


def concat_tensor(planes, sched: BitSchedule, numel: int) -> np.ndarray:
    """Accumulate the first m planes (in stage order) into k-bit codes."""
    codes = np.zeros(numel, dtype=np.uint32)
    for m, plane in enumerate(planes, start=1):
        codes = accumulate_codes(codes, plane, sched, m)
    return codes
