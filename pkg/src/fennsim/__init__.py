"""Toolchain for a 32-lane, 16-bit fixed-point vector SNN accelerator.

Subpackages cover the fixed-point lane arithmetic (:mod:`fennsim.fxp`),
the per-lane PRNG (:mod:`fennsim.prng`), the instruction set
(:mod:`fennsim.isa`), an assembler (:mod:`fennsim.asm`), a functional +
cycle-approximate core simulator (:mod:`fennsim.sim`), generated SNN
kernels (:mod:`fennsim.kernels`), a one-pass kernel-language compiler
(:mod:`fennsim.dslc`), the network/model layer (:mod:`fennsim.net`), host
golden models (:mod:`fennsim.golden`) and the benchmark harness
(:mod:`fennsim.bench`).
"""

__version__ = "0.1.0"
