"""Unit tests for the fixed-point lane arithmetic."""

import numpy as np
import pytest

from fennsim import fxp
from fennsim.fxp import (Fx16, QFormat, RoundMode, clamp16, mul_shift,
                         quantize, sat_add, sat_sub, shift_right_round,
                         to_float, wrap16)


class TestQFormat:
    def test_parse_roundtrip(self):
        for frac in range(16):
            for saturating in (False, True):
                fmt = QFormat(frac, saturating)
                assert QFormat.parse(fmt.name) == fmt

    def test_known_names(self):
        assert QFormat.parse("s7_8_sat_t") == QFormat(8, True)
        assert QFormat.parse("s0_15_t") == QFormat(15, False)
        assert QFormat(6).name == "s9_6_sat_t"

    def test_bad_names(self):
        for name in ("s8_8_sat_t", "s7_8", "u7_8_t", "s7_9_t"):
            with pytest.raises(ValueError):
                QFormat.parse(name)

    def test_bad_frac_bits(self):
        with pytest.raises(ValueError):
            QFormat(16)

    def test_scale(self):
        assert QFormat(8).scale == 256
        assert QFormat(15).scale == 32768


class TestWrapClamp:
    def test_wrap16(self):
        assert wrap16(32768) == -32768
        assert wrap16(-32769) == 32767
        assert wrap16(65536) == 0
        assert wrap16(12) == 12

    def test_clamp16(self):
        assert clamp16(40000) == 32767
        assert clamp16(-40000) == -32768
        assert clamp16(-5) == -5

    def test_arrays(self):
        a = np.array([32768, -32769, 100], dtype=np.int64)
        assert wrap16(a).tolist() == [-32768, 32767, 100]
        assert clamp16(a).tolist() == [32767, -32768, 100]


class TestSatOps:
    def test_saturating_add(self):
        assert sat_add(32000, 1000) == 32767
        assert sat_add(-32000, -1000) == -32768
        assert sat_add(1, 2) == 3

    def test_wrapping_add(self):
        assert sat_add(32000, 1000, saturating=False) == wrap16(33000)

    def test_saturating_sub(self):
        assert sat_sub(-32000, 1000) == -32768
        assert sat_sub(5, 3) == 2

    def test_extremes(self):
        assert sat_add(32767, 32767) == 32767
        assert sat_sub(-32768, 32767) == -32768
        assert sat_add(-32768, -32768, saturating=False) == 0


class TestMulShift:
    def test_basic(self):
        # 0.5 * 0.5 in s7_8: 128*128 >> 8 = 64.
        assert mul_shift(128, 128, 8) == 64

    def test_round_to_zero_is_floor(self):
        # (3 * 1) >> 1 = 1 (floor), to-nearest rounds up.
        assert mul_shift(3, 1, 1, RoundMode.TO_ZERO) == 1
        assert mul_shift(3, 1, 1, RoundMode.TO_NEAREST) == 2

    def test_negative_floor(self):
        # Arithmetic shift floors towards minus infinity.
        assert mul_shift(-3, 1, 1, RoundMode.TO_ZERO) == -2

    def test_wraps_not_clamps(self):
        # Large product overflows 16 bits and wraps.
        assert mul_shift(32767, 32767, 0) == wrap16(32767 * 32767)

    def test_stochastic_addend_masked(self):
        assert mul_shift(0, 0, 4, RoundMode.STOCHASTIC, rand=0xFFFF) == 0
        # rand below one output ULP is added before shifting.
        assert mul_shift(1, 1, 4, RoundMode.STOCHASTIC, rand=0xF) == 1

    def test_shift_range(self):
        with pytest.raises(ValueError):
            mul_shift(1, 1, 16)

    def test_array(self):
        a = np.array([128, -128], dtype=np.int64)
        assert mul_shift(a, a, 8).tolist() == [64, 64]


class TestShiftRightRound:
    def test_modes(self):
        assert shift_right_round(5, 1, RoundMode.TO_ZERO) == 2
        assert shift_right_round(5, 1, RoundMode.TO_NEAREST) == 3
        assert shift_right_round(-5, 1, RoundMode.TO_ZERO) == -3

    def test_zero_shift_identity(self):
        for mode in RoundMode:
            assert shift_right_round(-123, 0, mode, rand=0x7FFF) == -123

    def test_matches_wide_oracle(self, rng):
        a = rng.integers(-32768, 32768, 2000)
        for shift in (1, 4, 15):
            want = (a + (1 << (shift - 1))) >> shift
            got = shift_right_round(a, shift, RoundMode.TO_NEAREST)
            assert np.array_equal(got, wrap16(want))


class TestQuantize:
    def test_rounds_to_nearest(self):
        assert quantize(0.5, QFormat(8)) == 128
        assert quantize(1.0 / 512, QFormat(8)) == 1       # ties away from zero
        assert quantize(np.exp(-1 / 20.0), QFormat(15)) == 31170

    def test_clamp_warns(self):
        with pytest.warns(UserWarning):
            assert quantize(200.0, QFormat(8), "w") == 32767

    def test_to_float(self):
        assert to_float(64, QFormat(8)) == 0.25
        assert to_float(np.array([256, -256]), QFormat(8)).tolist() == [1.0, -1.0]


class TestFx16:
    def test_value(self):
        assert Fx16(384, QFormat(8)).value == 1.5

    def test_range_check(self):
        with pytest.raises(ValueError):
            Fx16(40000)
