"""Pure-numpy bit packing kernels (fallback for the compiled extension).

Values are packed MSB-first: the first value occupies the highest bits of
the first byte. The trailing partial byte, if any, is zero-padded in its
low bits. Vectorized via unpackbits/packbits so throughput stays usable
even without the extension.
"""

from __future__ import annotations

import numpy as np


def pack_bits(values: np.ndarray, width: int) -> np.ndarray:
    """Pack width-bit unsigned values into a uint8 array, MSB-first."""
    if not 1 <= width <= 32:
        raise ValueError(f"width must be in [1, 32], got {width}")
    values = np.ascontiguousarray(values, dtype=np.uint32)
    if values.size == 0:
        return np.zeros(0, dtype=np.uint8)
    shifts = np.arange(width - 1, -1, -1, dtype=np.uint32)
    bits = ((values[:, None] >> shifts) & np.uint32(1)).astype(np.uint8)
    return np.packbits(bits.reshape(-1))


def unpack_bits(buf: np.ndarray, count: int, width: int) -> np.ndarray:
    """Inverse of pack_bits: read count width-bit values from a byte array."""
    if not 1 <= width <= 32:
        raise ValueError(f"width must be in [1, 32], got {width}")
    buf = np.frombuffer(bytes(buf), dtype=np.uint8) if isinstance(buf, (bytes, bytearray)) \
        else np.ascontiguousarray(buf, dtype=np.uint8)
    total_bits = count * width
    if buf.size * 8 < total_bits:
        raise ValueError(f"buffer holds {buf.size * 8} bits, "
                         f"need {total_bits}")
    if count == 0:
        return np.zeros(0, dtype=np.uint32)
    bits = np.unpackbits(buf, count=total_bits).reshape(count, width)
    weights = (np.uint32(1) << np.arange(width - 1, -1, -1, dtype=np.uint32))
    return (bits.astype(np.uint32) * weights).sum(axis=1, dtype=np.uint32)
