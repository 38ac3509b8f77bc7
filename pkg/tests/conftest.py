"""Shared helpers for the test suite."""

from __future__ import annotations

import random

import numpy as np
import pytest

from fennsim import isa
from fennsim.asm import Assembler
from fennsim.fxp import RoundMode
from fennsim.sim import MemConfig, run_image


def assemble_and_run(source: str, cfg: MemConfig | None = None,
                     max_cycles: int = 10_000_000, engine: str = "pipelined"):
    """Assemble a .text program and run it to completion."""
    img = Assembler().assemble(source)
    return run_image(img, cfg, max_cycles=max_cycles, engine=engine)


def program(lines: list[str]) -> str:
    return ".text\n" + "\n".join(lines) + "\n"


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# ---------------------------------------------------------------------------
# Randomized instruction generation (shared by the ISA unit tests and the
# acceptance roundtrip test)
# ---------------------------------------------------------------------------

_MODES = (RoundMode.TO_ZERO, RoundMode.TO_NEAREST, RoundMode.STOCHASTIC)


def random_instr(mn: str, r: random.Random) -> isa.Instr:
    """A random instruction for the mnemonic with every meaningful field
    drawn from its full legal range."""
    reg = lambda: r.randrange(32)
    imm12 = lambda: r.randrange(-2048, 2048)
    f = {}
    if mn in ("vlui", "lui", "auipc"):
        f = dict(rd=reg(), imm=r.randrange(0x10000 if mn == "vlui" else 0x100000))
    elif mn in ("vadd", "vsub"):
        f = dict(rd=reg(), rs1=reg(), rs2=reg(), sat=r.random() < 0.5)
    elif mn == "vmul":
        f = dict(rd=reg(), rs1=reg(), rs2=reg(), shift=r.randrange(16),
                 mode=r.choice(_MODES))
    elif mn in ("vand", "vsl", "vsr", "vsel", "vteq", "vtne", "vtlt", "vtge"):
        f = dict(rd=reg(), rs1=reg(), rs2=reg())
    elif mn == "vsli":
        f = dict(rd=reg(), rs1=reg(), shift=r.randrange(16))
    elif mn == "vsri":
        f = dict(rd=reg(), rs1=reg(), shift=r.randrange(16), mode=r.choice(_MODES))
    elif mn == "vrng":
        f = dict(rd=reg())
    elif mn == "vandadd":
        f = dict(rd=reg(), rs1=reg(), rs2=reg(), shift=r.randrange(16))
    elif mn in ("vload.v", "vload.l"):
        f = dict(rd=reg(), rs1=reg(), imm=imm12())
    elif mn in ("vload.r0", "vload.r1"):
        f = dict(rs1=reg(), imm=imm12())
    elif mn == "vextract":
        f = dict(rd=reg(), rs1=reg(), imm=r.randrange(32))
    elif mn == "vfill":
        f = dict(rd=reg(), rs1=reg())
    elif mn in ("vstore.v", "vstore.l", "sb", "sh", "sw"):
        f = dict(rs1=reg(), rs2=reg(), imm=imm12())
    elif mn == "jal":
        f = dict(rd=reg(), imm=r.randrange(-(1 << 20), 1 << 20) & ~1)
    elif mn in ("beq", "bne", "blt", "bge", "bltu", "bgeu"):
        f = dict(rs1=reg(), rs2=reg(), imm=r.randrange(-4096, 4095) & ~1)
    elif mn in ("jalr", "lb", "lh", "lw", "lbu", "lhu",
                "addi", "slti", "sltiu", "xori", "ori", "andi"):
        f = dict(rd=reg(), rs1=reg(), imm=imm12())
    elif mn in ("slli", "srli", "srai"):
        f = dict(rd=reg(), rs1=reg(), imm=r.randrange(32))
    elif mn == "clz":
        f = dict(rd=reg(), rs1=reg())
    elif mn in ("add", "sub", "sll", "slt", "sltu", "xor", "srl", "sra",
                "or", "and", "mul", "mulh", "mulhsu", "mulhu",
                "div", "divu", "rem", "remu"):
        f = dict(rd=reg(), rs1=reg(), rs2=reg())
    elif mn in ("csrrw", "csrrs", "csrrc", "csrrwi", "csrrsi", "csrrci"):
        f = dict(rd=reg(), rs1=reg(), csr=r.randrange(0x1000))
    elif mn in ("ecall", "ebreak", "fence"):
        f = {}
    else:
        raise ValueError(f"no generator for mnemonic {mn!r}")
    return isa.Instr(mn, **f)


# ---------------------------------------------------------------------------
# Random terminating programs for the pipelined-vs-reference differential
# test.  Control flow is forward-only so every program halts.
# ---------------------------------------------------------------------------

def random_program(r: random.Random, max_instrs: int = 500):
    from fennsim.asm import LANE_ALL, ProgramImage, Section

    n = r.randrange(10, max_instrs - 6)
    body: list[isa.Instr] = [
        isa.Instr("vlui", rd=31, imm=r.randrange(64)),   # lane-local address
        isa.Instr("addi", rd=8, rs1=0, imm=r.randrange(1, 2048)),
    ]
    datareg = lambda: r.randrange(1, 16)
    while len(body) < n:
        kind = r.random()
        if kind < 0.30:      # scalar ALU
            mn = r.choice(("add", "sub", "sll", "slt", "sltu", "xor", "srl",
                           "sra", "or", "and", "mul", "mulh", "mulhsu",
                           "mulhu", "div", "divu", "rem", "remu"))
            body.append(isa.Instr(mn, rd=datareg(), rs1=datareg(), rs2=datareg()))
        elif kind < 0.45:    # scalar immediate
            mn = r.choice(("addi", "slti", "sltiu", "xori", "ori", "andi",
                           "slli", "srli", "srai", "clz", "lui", "auipc"))
            if mn in ("slli", "srli", "srai"):
                imm = r.randrange(32)
            elif mn in ("lui", "auipc"):
                imm = r.randrange(0x100000)
            elif mn == "clz":
                imm = 0
            else:
                imm = r.randrange(-2048, 2048)
            body.append(isa.Instr(mn, rd=datareg(), rs1=datareg(), imm=imm))
        elif kind < 0.60:    # scalar memory (dmem, base x0)
            mn = r.choice(("lw", "lh", "lhu", "lb", "lbu", "sw", "sh", "sb"))
            align = {"lw": 4, "sw": 4, "lh": 2, "lhu": 2, "sh": 2}.get(mn, 1)
            off = r.randrange(0, 1024 // align) * align
            if mn.startswith("s"):
                body.append(isa.Instr(mn, rs1=0, rs2=datareg(), imm=off))
            else:
                body.append(isa.Instr(mn, rd=datareg(), rs1=0, imm=off))
        elif kind < 0.80:    # vector ALU
            mn = r.choice(("vadd", "vsub", "vand", "vsl", "vsr", "vmul",
                           "vsli", "vsri", "vlui", "vrng", "vfill", "vsel",
                           "vteq", "vtne", "vtlt", "vtge", "vextract",
                           "vandadd"))
            vreg = lambda: r.randrange(1, 31)
            if mn == "vlui":
                body.append(isa.Instr(mn, rd=vreg(), imm=r.randrange(0x10000)))
            elif mn == "vrng":
                body.append(isa.Instr(mn, rd=vreg()))
            elif mn == "vfill":
                body.append(isa.Instr(mn, rd=vreg(), rs1=datareg()))
            elif mn == "vextract":
                body.append(isa.Instr(mn, rd=datareg(), rs1=vreg(),
                                      imm=r.randrange(32)))
            elif mn in ("vteq", "vtne", "vtlt", "vtge"):
                body.append(isa.Instr(mn, rd=datareg(), rs1=vreg(), rs2=vreg()))
            elif mn == "vsel":
                body.append(isa.Instr(mn, rd=vreg(), rs1=datareg(), rs2=vreg()))
            elif mn in ("vsli", "vsri"):
                body.append(isa.Instr(mn, rd=vreg(), rs1=vreg(),
                                      shift=r.randrange(16),
                                      mode=r.choice(_MODES)))
            elif mn == "vmul":
                body.append(isa.Instr(mn, rd=vreg(), rs1=vreg(), rs2=vreg(),
                                      shift=r.randrange(16),
                                      mode=r.choice(_MODES)))
            elif mn == "vandadd":
                body.append(isa.Instr(mn, rd=vreg(), rs1=vreg(), rs2=8,
                                      shift=r.randrange(6)))
            else:
                body.append(isa.Instr(mn, rd=vreg(), rs1=vreg(), rs2=vreg(),
                                      sat=r.random() < 0.5))
        elif kind < 0.90:    # vector memory
            mn = r.choice(("vload.v", "vstore.v", "vload.l", "vstore.l"))
            vreg = r.randrange(1, 31)
            if mn.endswith(".v"):
                off = r.randrange(0, 16) * 64
                if mn == "vload.v":
                    body.append(isa.Instr(mn, rd=vreg, rs1=0, imm=off))
                else:
                    body.append(isa.Instr(mn, rs1=0, rs2=vreg, imm=off))
            else:
                # v31 holds a small per-lane address set up at program start.
                off = r.randrange(0, 64)
                if mn == "vload.l":
                    body.append(isa.Instr(mn, rd=vreg, rs1=31, imm=off))
                else:
                    body.append(isa.Instr(mn, rs1=31, rs2=vreg, imm=off))
        elif kind < 0.97:    # forward branch or jump over a few instructions
            skip = r.randrange(1, 4)
            off = 4 * (skip + 1)
            if r.random() < 0.3:
                body.append(isa.Instr("jal", rd=r.choice((0, 1)), imm=off))
            else:
                mn = r.choice(("beq", "bne", "blt", "bge", "bltu", "bgeu"))
                body.append(isa.Instr(mn, rs1=datareg(), rs2=datareg(), imm=off))
        else:                # CSR traffic on a scratch CSR
            mn = r.choice(("csrrw", "csrrs", "csrrc", "csrrwi"))
            body.append(isa.Instr(mn, rd=datareg(), rs1=datareg(), csr=0x340))
    # Landing pad so a trailing forward branch cannot jump past the end.
    body += [isa.Instr("addi", rd=0, rs1=0, imm=0)] * 3
    body += [isa.Instr("addi", rd=10, rs1=0, imm=0), isa.Instr("ecall")]
    code = b"".join(isa.encode(i).to_bytes(4, "little") for i in body)
    img = ProgramImage()
    img.sections.append(Section(0, LANE_ALL, 0, bytearray(code)))
    return img


SCALAR_MNEMONICS = (
    "lui", "auipc", "jal", "jalr",
    "beq", "bne", "blt", "bge", "bltu", "bgeu",
    "lb", "lh", "lw", "lbu", "lhu", "sb", "sh", "sw",
    "addi", "slti", "sltiu", "xori", "ori", "andi",
    "slli", "srli", "srai", "clz",
    "add", "sub", "sll", "slt", "sltu", "xor", "srl", "sra", "or", "and",
    "mul", "mulh", "mulhsu", "mulhu", "div", "divu", "rem", "remu",
    "csrrw", "csrrs", "csrrc", "csrrwi", "csrrsi", "csrrci",
    "ecall", "ebreak", "fence",
)
