"""Per-tensor affine quantization to k-bit unsigned codes and back.

Codes are produced with a flooring map over the tensor's [min, max] range;
flooring (rather than rounding) is what keeps most-significant-bits-first
transmission lossless. Dequantization adds half of the residual interval
back, so a value reconstructed from the top B bits sits at the center of
the interval those bits pin down.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import Tensor
from .errors import QuantizationError

MAX_BITS = 16

# Relative epsilon widening the quantization denominator just enough that
# the maximum element floors to 2**k - 1 instead of 2**k.
EPS_SCALE = 2.0 ** -20


@dataclass(frozen=True)
class QuantizedTensor:
    """k-bit unsigned codes plus the per-tensor float range.

    codes is a flat row-major uint32 array of length prod(shape); every
    code is < 2**bits. min_val/max_val are float32 scalars.
    """

    shape: tuple[int, ...]
    bits: int
    min_val: np.float32
    max_val: np.float32
    codes: np.ndarray

    def __post_init__(self):
        if not 1 <= self.bits <= MAX_BITS:
            raise QuantizationError(f"bits must be in [1, {MAX_BITS}], got {self.bits}")
        if not (np.isfinite(self.min_val) and np.isfinite(self.max_val)):
            raise QuantizationError("non-finite quantization range")
        if self.min_val > self.max_val:
            raise QuantizationError("min_val exceeds max_val")
        codes = np.ascontiguousarray(self.codes, dtype=np.uint32).reshape(-1)
        if codes.size != int(np.prod(self.shape)):
            raise QuantizationError("codes length does not match shape")
        if codes.size and int(codes.max()) >= 1 << self.bits:
            raise QuantizationError(f"code out of range for {self.bits}-bit tensor")
        codes.setflags(write=False)
        object.__setattr__(self, "shape", tuple(int(d) for d in self.shape))
        object.__setattr__(self, "min_val", np.float32(self.min_val))
        object.__setattr__(self, "max_val", np.float32(self.max_val))
        object.__setattr__(self, "codes", codes)

    @property
    def numel(self) -> int:
        return int(self.codes.size)

    def with_codes(self, codes: np.ndarray) -> "QuantizedTensor":
        return QuantizedTensor(self.shape, self.bits, self.min_val,
                               self.max_val, codes)


def quantize(t: Tensor, bits: int) -> QuantizedTensor:
    """Map each float to floor(2**bits * (x - min) / (range + eps)).

    The epsilon is range * 2**-20, keeping every code strictly below
    2**bits; a defensive clamp guards against double-rounding. A constant
    tensor (min == max) quantizes to all-zero codes.
    """
    if not 1 <= bits <= MAX_BITS:
        raise QuantizationError(f"bits must be in [1, {MAX_BITS}], got {bits}")
    data = t.ravel()
    if data.size == 0:
        raise QuantizationError("cannot quantize an empty tensor")
    min_val = np.float32(data.min())
    max_val = np.float32(data.max())
    if min_val == max_val:
        codes = np.zeros(data.size, dtype=np.uint32)
        return QuantizedTensor(t.shape, bits, min_val, max_val, codes)

    rng = float(max_val) - float(min_val)
    denom = rng + rng * EPS_SCALE
    # (x - min) / denom is in [0, 1); scaling by 2**bits is exact.
    scaled = ((data.astype(np.float64) - float(min_val)) / denom) * (2.0 ** bits)
    codes = np.floor(scaled).astype(np.uint32)
    np.minimum(codes, np.uint32((1 << bits) - 1), out=codes)
    return QuantizedTensor(t.shape, bits, min_val, max_val, codes)


def dequantize(q: QuantizedTensor, received_bits: int) -> Tensor:
    """Restore floats from codes whose top received_bits bits are known.

    value = range * code / 2**k + min + range / 2**(received_bits + 1).
    The last term recenters the flooring loss: with B bits known the true
    value lies in an interval of width range / 2**B, and the correction
    places the output at its midpoint. Degenerate ranges return min_val
    exactly.
    """
    B = received_bits
    if not 1 <= B <= q.bits:
        raise QuantizationError(
            f"received_bits must be in [1, {q.bits}], got {B}")
    if q.min_val == q.max_val:
        values = np.full(q.codes.size, q.min_val, dtype=np.float32)
        return Tensor(q.shape, values)

    rng = float(q.max_val) - float(q.min_val)
    offset = float(q.min_val) + rng / (2.0 ** (B + 1))
    values = q.codes.astype(np.float64) * (rng / (2.0 ** q.bits)) + offset
    return Tensor(q.shape, values.astype(np.float32))


def truncate_codes(q: QuantizedTensor, kept_bits: int) -> QuantizedTensor:
    """Zero the low (bits - kept_bits) bits of every code.

    Models the intermediate state after only the top kept_bits worth of
    planes arrived.
    """
    if not 1 <= kept_bits <= q.bits:
        raise QuantizationError(
            f"kept_bits must be in [1, {q.bits}], got {kept_bits}")
    drop = q.bits - kept_bits
    mask = np.uint32(((1 << kept_bits) - 1) << drop)
    return q.with_codes(q.codes & mask)
