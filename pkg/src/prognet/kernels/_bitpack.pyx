# cython: language_level=3, boundscheck=False, wraparound=False
"""Compiled MSB-first bit packing kernels.

Same contract as kernels.fallback: values packed most-significant-bit
first, trailing byte zero-padded in its low bits.
"""

import numpy as np

cimport numpy as cnp

cnp.import_array()


def pack_bits(values, int width):
    """Pack width-bit unsigned values into a uint8 array, MSB-first."""
    if not 1 <= width <= 32:
        raise ValueError(f"width must be in [1, 32], got {width}")
    cdef const cnp.uint32_t[::1] vals = np.ascontiguousarray(values, dtype=np.uint32)
    cdef Py_ssize_t n = vals.shape[0]
    cdef Py_ssize_t nbytes = (n * width + 7) // 8
    out = np.zeros(nbytes, dtype=np.uint8)
    if n == 0:
        return out
    cdef cnp.uint8_t[::1] buf = out
    cdef unsigned long long acc = 0
    cdef int nbits = 0
    cdef Py_ssize_t i, j = 0
    with nogil:
        for i in range(n):
            acc = (acc << width) | vals[i]
            nbits += width
            while nbits >= 8:
                nbits -= 8
                buf[j] = <cnp.uint8_t> ((acc >> nbits) & 0xFF)
                j += 1
        if nbits > 0:
            buf[j] = <cnp.uint8_t> ((acc << (8 - nbits)) & 0xFF)
    return out


def unpack_bits(buf, Py_ssize_t count, int width):
    """Inverse of pack_bits: read count width-bit values from a byte array."""
    if not 1 <= width <= 32:
        raise ValueError(f"width must be in [1, 32], got {width}")
    if isinstance(buf, (bytes, bytearray)):
        buf = np.frombuffer(bytes(buf), dtype=np.uint8)
    cdef const cnp.uint8_t[::1] data = np.ascontiguousarray(buf, dtype=np.uint8)
    if data.shape[0] * 8 < count * width:
        raise ValueError(f"buffer holds {data.shape[0] * 8} bits, "
                         f"need {count * width}")
    out = np.zeros(count, dtype=np.uint32)
    if count == 0:
        return out
    cdef cnp.uint32_t[::1] vals = out
    cdef unsigned long long acc = 0
    cdef int nbits = 0
    cdef unsigned long long mask = (<unsigned long long> 1 << width) - 1
    cdef Py_ssize_t i, j = 0
    with nogil:
        for i in range(count):
            while nbits < width:
                acc = (acc << 8) | data[j]
                j += 1
                nbits += 8
            nbits -= width
            vals[i] = <cnp.uint32_t> ((acc >> nbits) & mask)
    return out
