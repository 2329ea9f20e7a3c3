"""Bit packing kernels: MSB-first layout, round trips, backend parity."""

import numpy as np
import pytest

from prognet import kernels
from prognet.kernels import fallback

BACKENDS = [("python", fallback)]
try:
    from prognet.kernels import _bitpack
    BACKENDS.append(("cython", _bitpack))
except ImportError:
    pass


def oracle_pack(values, width):
    """Concatenate fixed-width binary strings, pad low bits of last byte."""
    bits = "".join(format(int(v), f"0{width}b") for v in values)
    bits += "0" * (-len(bits) % 8)
    return bytes(int(bits[i:i + 8], 2) for i in range(0, len(bits), 8))


@pytest.mark.parametrize("name,mod", BACKENDS)
class TestPacking:
    def test_msb_first_golden_byte(self, name, mod):
        values = np.array([1, 0, 1, 1, 0, 0, 1, 0], dtype=np.uint32)
        assert bytes(mod.pack_bits(values, 1)) == bytes([0b10110010])

    def test_matches_string_oracle(self, name, mod):
        rng = np.random.default_rng(1)
        for width in (1, 2, 3, 5, 7, 8, 11, 16):
            values = rng.integers(0, 1 << width, size=53, dtype=np.uint32)
            assert bytes(mod.pack_bits(values, width)) == oracle_pack(values, width)

    def test_partial_byte_zero_padded(self, name, mod):
        values = np.array([3], dtype=np.uint32)
        assert bytes(mod.pack_bits(values, 2)) == bytes([0b11000000])

    def test_round_trip(self, name, mod):
        rng = np.random.default_rng(2)
        for width in range(1, 17):
            for count in (0, 1, 7, 8, 9, 1000):
                values = rng.integers(0, 1 << width, size=count, dtype=np.uint32)
                packed = mod.pack_bits(values, width)
                assert len(packed) == (count * width + 7) // 8
                out = mod.unpack_bits(packed, count, width)
                assert np.array_equal(out, values)

    def test_unpack_accepts_bytes(self, name, mod):
        out = mod.unpack_bits(b"\xb2", 8, 1)
        assert out.tolist() == [1, 0, 1, 1, 0, 0, 1, 0]

    def test_short_buffer_rejected(self, name, mod):
        with pytest.raises(ValueError):
            mod.unpack_bits(b"\x00", 5, 2)

    def test_width_bounds(self, name, mod):
        values = np.zeros(4, dtype=np.uint32)
        with pytest.raises(ValueError):
            mod.pack_bits(values, 0)
        with pytest.raises(ValueError):
            mod.unpack_bits(b"\x00" * 32, 4, 33)


@pytest.mark.skipif(len(BACKENDS) < 2, reason="compiled extension unavailable")
class TestBackendParity:
    def test_pack_identical(self):
        rng = np.random.default_rng(3)
        for width in (1, 2, 4, 6, 12, 16):
            values = rng.integers(0, 1 << width, size=4097, dtype=np.uint32)
            a = fallback.pack_bits(values, width)
            b = BACKENDS[1][1].pack_bits(values, width)
            assert bytes(a) == bytes(b)

    def test_unpack_identical(self):
        rng = np.random.default_rng(4)
        for width in (1, 3, 8, 16):
            raw = rng.integers(0, 256, size=1 + (997 * width + 7) // 8,
                               dtype=np.uint8)
            a = fallback.unpack_bits(raw, 997, width)
            b = BACKENDS[1][1].unpack_bits(raw, 997, width)
            assert np.array_equal(a, b)


def test_backend_selected():
    assert kernels.BACKEND in ("cython", "python")
