"""Quantizer behavior against a pure-Python flooring oracle plus the
analytic error bounds."""

import math

import numpy as np
import pytest

from prognet.core import Tensor
from prognet.errors import QuantizationError
from prognet.quantize import (EPS_SCALE, QuantizedTensor, dequantize,
                              quantize, truncate_codes)


def oracle_quantize(values, bits):
    """Scalar double-precision reference: floor(2^k (x-min)/(range+eps))."""
    mn, mx = min(values), max(values)
    if mn == mx:
        return [0] * len(values), mn, mx
    rng = mx - mn
    denom = rng + rng * EPS_SCALE
    codes = [min(math.floor(((x - mn) / denom) * 2.0 ** bits),
                 2 ** bits - 1) for x in values]
    return codes, mn, mx


def oracle_dequantize(code, bits, mn, mx, received):
    if mn == mx:
        return mn
    rng = mx - mn
    return code * (rng / 2.0 ** bits) + (mn + rng / 2.0 ** (received + 1))


class TestQuantizeExamples:
    def test_min_element_maps_to_zero(self):
        q = quantize(Tensor((3,), [-1.5, 0.0, 2.0]), 8)
        assert q.codes[0] == 0

    def test_constant_tensor_degenerate_branch(self):
        q = quantize(Tensor((2,), [0.7, 0.7]), 8)
        assert q.codes.tolist() == [0, 0]
        assert q.min_val == q.max_val == np.float32(0.7)

    def test_three_point_ramp_k2(self):
        # oracle: 4*0.5/(1+2^-20) floors to 1, 4*1.0/(1+2^-20) floors to 3
        values = [0.0, 0.5, 1.0]
        expected, _, _ = oracle_quantize(values, 2)
        assert expected == [0, 1, 3]
        q = quantize(Tensor((3,), values), 2)
        assert q.codes.tolist() == expected

    def test_matches_oracle_randomized(self):
        rng = np.random.default_rng(11)
        for bits in (1, 2, 5, 8, 13, 16):
            values = rng.normal(scale=3.0, size=64).astype(np.float32)
            q = quantize(Tensor((64,), values), bits)
            expected, mn, mx = oracle_quantize([float(v) for v in values], bits)
            assert q.codes.tolist() == expected
            assert q.min_val == np.float32(mn) and q.max_val == np.float32(mx)

    def test_invalid_bits(self):
        t = Tensor((2,), [0.0, 1.0])
        for bits in (0, 17, -3):
            with pytest.raises(QuantizationError):
                quantize(t, bits)

    def test_codes_below_limit_for_all_k(self):
        rng = np.random.default_rng(5)
        values = rng.uniform(-10, 10, size=1000).astype(np.float32)
        for bits in range(1, 17):
            q = quantize(Tensor((1000,), values), bits)
            assert int(q.codes.max()) < 2 ** bits


class TestDequantizeExamples:
    def test_degenerate_range_returns_min(self):
        q = quantize(Tensor((4,), [0.7] * 4), 8)
        for received in (1, 4, 8):
            out = dequantize(q, received)
            assert out.ravel().tolist() == [np.float32(0.7)] * 4

    def test_full_precision_k2(self):
        # min=0, max=1, k=2, code=3, B=2 -> 3/4 + 1/8 = 0.875
        q = QuantizedTensor((1,), 2, np.float32(0), np.float32(1),
                            np.array([3], dtype=np.uint32))
        assert dequantize(q, 2).ravel()[0] == np.float32(0.875)

    def test_partial_precision_top_bit_only(self):
        # min=0, max=1, k=4, code=0b1000, B=1 -> 8/16 + 1/4 = 0.75
        q = QuantizedTensor((1,), 4, np.float32(0), np.float32(1),
                            np.array([0b1000], dtype=np.uint32))
        assert dequantize(q, 1).ravel()[0] == np.float32(0.75)

    def test_received_bits_range_checked(self):
        q = quantize(Tensor((2,), [0.0, 1.0]), 4)
        for received in (0, 5):
            with pytest.raises(QuantizationError):
                dequantize(q, received)

    def test_matches_oracle(self):
        rng = np.random.default_rng(3)
        values = rng.uniform(-2, 7, size=32).astype(np.float32)
        q = quantize(Tensor((32,), values), 8)
        for received in (1, 3, 8):
            got = dequantize(truncate_codes(q, received), received).ravel()
            mask = ((1 << received) - 1) << (8 - received)
            for g, code in zip(got, q.codes):
                want = oracle_dequantize(int(code) & mask, 8,
                                         float(q.min_val), float(q.max_val),
                                         received)
                assert g == np.float32(want)


class TestBounds:
    def test_round_trip_bound_all_k(self):
        rng = np.random.default_rng(42)
        for bits in range(1, 17):
            values = rng.uniform(-5, 5, size=2000).astype(np.float32)
            t = Tensor((2000,), values)
            q = quantize(t, bits)
            out = dequantize(q, bits)
            span = float(q.max_val) - float(q.min_val)
            bound = span / 2 ** bits + span * EPS_SCALE
            err = np.abs(out.ravel().astype(np.float64)
                         - t.ravel().astype(np.float64))
            assert err.max() <= bound * (1 + 1e-6)

    def test_partial_precision_bound_halves_per_bit(self):
        rng = np.random.default_rng(17)
        values = rng.normal(size=5000).astype(np.float32)
        t = Tensor((5000,), values)
        q = quantize(t, 16)
        span = float(q.max_val) - float(q.min_val)
        prev_bound = None
        for received in range(1, 17):
            out = dequantize(truncate_codes(q, received), received)
            err = np.abs(out.ravel().astype(np.float64)
                         - t.ravel().astype(np.float64)).max()
            bound = span / 2 ** received + span * EPS_SCALE
            assert err <= bound * (1 + 1e-6)
            if prev_bound is not None:
                # guaranteed interval halves as each extra bit arrives
                assert bound < prev_bound
            prev_bound = bound

    def test_output_never_exceeds_corrected_range(self):
        rng = np.random.default_rng(23)
        values = rng.uniform(-1, 1, size=1000).astype(np.float32)
        q = quantize(Tensor((1000,), values), 8)
        span = float(q.max_val) - float(q.min_val)
        for received in (1, 4, 8):
            out = dequantize(truncate_codes(q, received), received).ravel()
            assert out.min() >= q.min_val
            assert out.max() <= float(q.max_val) + span / 2 ** (received + 1) + 1e-12

    def test_permutation_invariance(self):
        rng = np.random.default_rng(9)
        values = rng.normal(size=256).astype(np.float32)
        perm = rng.permutation(256)
        q = quantize(Tensor((256,), values), 12)
        qp = quantize(Tensor((256,), values[perm]), 12)
        assert np.array_equal(q.codes[perm], qp.codes)


class TestQuantizedTensorInvariants:
    def test_code_out_of_range_rejected(self):
        with pytest.raises(QuantizationError):
            QuantizedTensor((1,), 2, np.float32(0), np.float32(1),
                            np.array([4], dtype=np.uint32))

    def test_min_above_max_rejected(self):
        with pytest.raises(QuantizationError):
            QuantizedTensor((1,), 2, np.float32(1), np.float32(0),
                            np.array([0], dtype=np.uint32))

    def test_codes_length_must_match_shape(self):
        with pytest.raises(QuantizationError):
            QuantizedTensor((3,), 2, np.float32(0), np.float32(1),
                            np.array([0, 1], dtype=np.uint32))
