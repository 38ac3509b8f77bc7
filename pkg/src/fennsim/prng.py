"""Per-lane Xoroshiro32++ generator.

Each lane carries 32 bits of state in two 16-bit seed registers.  The
state update uses the (13, 5, 10) shift/rotate constants with the "++"
output scrambler rotl16(s0 + s1, 9) + s0.  The architectural result of
the random-number instruction is the 16-bit output shifted right by one,
applied by the consumer.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

MASK16 = 0xFFFF
NUM_LANES = 32


def rotl16(x, k):
    return ((x << k) | (x >> (16 - k))) & MASK16


@dataclass(frozen=True)
class RngState:
    s0: int
    s1: int

    def __post_init__(self):
        if not (0 <= self.s0 <= MASK16 and 0 <= self.s1 <= MASK16):
            raise ValueError("seed halves must be 16-bit")
        if self.s0 == 0 and self.s1 == 0:
            raise ValueError("all-zero RNG state is invalid")


def next_state(state: RngState) -> tuple[int, RngState]:
    """One generator step: returns the 16-bit output and the new state."""
    s0, s1 = state.s0, state.s1
    value = (rotl16((s0 + s1) & MASK16, 9) + s0) & MASK16
    s1 ^= s0
    s0 = rotl16(s0, 13) ^ s1 ^ ((s1 << 5) & MASK16)
    s1 = rotl16(s1, 10)
    return value, RngState(s0, s1)


class LaneRng:
    """Vectorized generator state for all 32 lanes.

    Default seeds give every lane a distinct nonzero state so that a core
    reset produces usable (if correlated-by-construction) streams; real
    programs overwrite them through the seed-load instructions.
    """

    def __init__(self, num_lanes: int = NUM_LANES):
        self.num_lanes = num_lanes
        self.s0 = np.arange(1, num_lanes + 1, dtype=np.uint32)
        self.s1 = np.zeros(num_lanes, dtype=np.uint32)

    def set_seed(self, which: int, values: np.ndarray) -> np.ndarray:
        """Replace half of each lane's state (which=0 -> s0, 1 -> s1).

        Returns the indices of lanes left in the invalid all-zero state.
        """
        vals = np.asarray(values, dtype=np.uint32) & MASK16
        if which == 0:
            self.s0 = vals.copy()
        elif which == 1:
            self.s1 = vals.copy()
        else:
            raise ValueError("which must be 0 or 1")
        return np.flatnonzero((self.s0 | self.s1) == 0)

    def step(self) -> np.ndarray:
        """Advance every lane once; returns the 16-bit outputs (uint32)."""
        s0, s1 = self.s0, self.s1
        value = (rotl16((s0 + s1) & MASK16, 9) + s0) & MASK16
        s1 = s1 ^ s0
        self.s0 = rotl16(s0, 13) ^ s1 ^ ((s1 << 5) & MASK16)
        self.s1 = rotl16(s1, 10)
        return value

    def copy(self) -> "LaneRng":
        c = LaneRng(self.num_lanes)
        c.s0 = self.s0.copy()
        c.s1 = self.s1.copy()
        return c
