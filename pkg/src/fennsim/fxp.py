"""Bit-exact 16-bit fixed-point lane arithmetic.

All lane maths in the accelerator operates on signed 16-bit raw values.
The functions here take either plain Python ints or numpy integer arrays
(which must be at least 32 bits wide so intermediate products do not
overflow) and return the same kind.  Raw values are always kept in the
signed range [-32768, 32767].
"""

from __future__ import annotations

import enum
import re
import warnings
from dataclasses import dataclass

import numpy as np

INT16_MIN = -32768
INT16_MAX = 32767


class RoundMode(enum.IntEnum):
    """Rounding applied by the multiply/shift and immediate-shift datapaths."""

    TO_ZERO = 0      # nothing added before the arithmetic shift (floor)
    TO_NEAREST = 1   # add half an output ULP before shifting
    STOCHASTIC = 2   # add a random value below one output ULP


@dataclass(frozen=True)
class QFormat:
    """Signed fixed-point format: ``frac_bits`` fractional bits, 15 - frac_bits
    integer bits, plus a saturation flag."""

    frac_bits: int
    saturating: bool = True

    def __post_init__(self):
        if not 0 <= self.frac_bits <= 15:
            raise ValueError(f"frac_bits must be in [0, 15], got {self.frac_bits}")

    @property
    def int_bits(self) -> int:
        return 15 - self.frac_bits

    @property
    def name(self) -> str:
        sat = "_sat" if self.saturating else ""
        return f"s{self.int_bits}_{self.frac_bits}{sat}_t"

    @property
    def scale(self) -> int:
        return 1 << self.frac_bits

    @classmethod
    def parse(cls, name: str) -> "QFormat":
        m = re.fullmatch(r"s(\d+)_(\d+)(_sat)?_t", name)
        if not m:
            raise ValueError(f"bad fixed-point format name: {name!r}")
        int_bits, frac_bits = int(m.group(1)), int(m.group(2))
        if int_bits + frac_bits != 15:
            raise ValueError(
                f"format {name!r}: integer and fraction bits must total 15"
            )
        return cls(frac_bits, saturating=m.group(3) is not None)


S7_8_SAT = QFormat(8, True)
S0_15_SAT = QFormat(15, True)
S9_6_SAT = QFormat(6, True)


@dataclass(frozen=True)
class Fx16:
    """One raw 16-bit lane value tagged with its format."""

    raw: int
    fmt: QFormat = S7_8_SAT

    def __post_init__(self):
        if not INT16_MIN <= self.raw <= INT16_MAX:
            raise ValueError(f"raw value {self.raw} outside 16-bit range")

    @property
    def value(self) -> float:
        return self.raw / self.fmt.scale


def _is_array(x) -> bool:
    return isinstance(x, np.ndarray)


def wrap16(x):
    """Two's-complement wraparound to signed 16 bits."""
    return ((x + 0x8000) & 0xFFFF) - 0x8000


def clamp16(x):
    """Saturate to the signed 16-bit range."""
    if _is_array(x):
        return np.clip(x, INT16_MIN, INT16_MAX)
    return min(max(x, INT16_MIN), INT16_MAX)


def sat_add(a, b, saturating=True):
    """Lane addition: clamp the exact sum if saturating, else wrap."""
    s = a + b
    return clamp16(s) if saturating else wrap16(s)


def sat_sub(a, b, saturating=True):
    """Lane subtraction: clamp the exact difference if saturating, else wrap."""
    d = a - b
    return clamp16(d) if saturating else wrap16(d)


def _round_addend(shift, mode, rand):
    if mode == RoundMode.TO_ZERO:
        return 0
    if mode == RoundMode.TO_NEAREST:
        # Half an output ULP; no half exists when the shift is zero.
        return (1 << (shift - 1)) if shift > 0 else 0
    if mode == RoundMode.STOCHASTIC:
        return rand & ((1 << shift) - 1)
    raise ValueError(f"bad rounding mode {mode!r}")


def mul_shift(a, b, shift, mode=RoundMode.TO_ZERO, rand=0):
    """Multiply-and-shift lane op: exact 32-bit product, rounding addend,
    arithmetic right shift, then truncation to the low 16 bits.

    There is deliberately no clamp stage: each lane is one MAC plus a
    barrel shifter, so callers pick shifts that avoid overflow.
    """
    if not 0 <= shift <= 15:
        raise ValueError(f"shift must be in [0, 15], got {shift}")
    p = a * b + _round_addend(shift, mode, rand)
    return wrap16(p >> shift)


def shift_right_round(a, shift, mode=RoundMode.TO_ZERO, rand=0):
    """Arithmetic right shift with the same rounding modes as mul_shift."""
    if not 0 <= shift <= 15:
        raise ValueError(f"shift must be in [0, 15], got {shift}")
    s = a + _round_addend(shift, mode, rand)
    return wrap16(s >> shift)


def quantize(x: float, fmt: QFormat, name: str | None = None) -> int:
    """Host-side conversion of a real parameter to a raw lane value.

    Rounds to nearest (half away from zero at the representable midpoint)
    and clamps to the 16-bit range, warning when clamping changes the value.
    """
    scaled = x * fmt.scale
    raw = int(np.floor(scaled + 0.5))
    if raw < INT16_MIN or raw > INT16_MAX:
        what = f"parameter {name!r}" if name else f"value {x!r}"
        warnings.warn(
            f"{what} does not fit format {fmt.name}; clamping", stacklevel=2
        )
        raw = min(max(raw, INT16_MIN), INT16_MAX)
    return raw


def to_float(raw, fmt: QFormat):
    """Interpret raw lane values in the given format."""
    return raw / fmt.scale
