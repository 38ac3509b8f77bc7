"""Instruction set definition: encoder and decoder.

The vector instructions live in the reclaimed 32-bit encoding quadrant
whose opcode ends in binary 10 (compressed-instruction support is
removed), so they can never collide with the scalar RV32IM/Zicsr subset,
whose opcodes all end in 11.

Canonical instructions are represented by :class:`Instr`; ``encode`` and
``decode`` are exact inverses on them.  Every 32-bit word either decodes
or raises :class:`IllegalInstruction` - there is no third outcome.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .fxp import RoundMode

MASK32 = 0xFFFFFFFF


class IllegalInstruction(Exception):
    def __init__(self, word: int, why: str = "unknown encoding"):
        self.word = word & MASK32
        super().__init__(f"illegal instruction 0x{self.word:08x}: {why}")


class EncodeError(Exception):
    pass


# Vector opcodes (all end in 0b10).
OP_VLUI = 0b0000110
OP_VARITH = 0b0000010
OP_VTEST = 0b0001010
OP_VSEL = 0b0001110
OP_VSHIFTI = 0b0100110
OP_VRNG = 0b0100010
OP_VLOAD = 0b0010010
OP_VMOVE = 0b0011010
OP_VSTORE = 0b0010110

# Scalar opcodes (standard).
OP_LUI = 0b0110111
OP_AUIPC = 0b0010111
OP_JAL = 0b1101111
OP_JALR = 0b1100111
OP_BRANCH = 0b1100011
OP_LOAD = 0b0000011
OP_STORE = 0b0100011
OP_IMM = 0b0010011
OP_OP = 0b0110011
OP_SYSTEM = 0b1110011
OP_FENCE = 0b0001111

# Control and status registers: DMA engine plumbing, the performance-region
# selector and the standard cycle/instret counters.
CSR_DMA_EXT_ADDR = 0x7C0
CSR_DMA_LOCAL_ADDR = 0x7C1
CSR_DMA_BYTES = 0x7C2
CSR_DMA_CTRL = 0x7C3
CSR_DMA_STATUS = 0x7C4
CSR_PERF_REGION = 0x7C5
CSR_MCYCLE = 0xB00
CSR_MINSTRET = 0xB02

CSR_NAMES = {
    "dma_ext_addr": CSR_DMA_EXT_ADDR,
    "dma_local_addr": CSR_DMA_LOCAL_ADDR,
    "dma_bytes": CSR_DMA_BYTES,
    "dma_ctrl": CSR_DMA_CTRL,
    "dma_status": CSR_DMA_STATUS,
    "perf_region": CSR_PERF_REGION,
    "mcycle": CSR_MCYCLE,
    "minstret": CSR_MINSTRET,
}

VECTOR_MNEMONICS = frozenset({
    "vlui", "vadd", "vsub", "vand", "vsl", "vsr", "vmul",
    "vteq", "vtne", "vtlt", "vtge", "vsel", "vsli", "vsri",
    "vrng", "vandadd", "vload.v", "vload.l", "vload.r0", "vload.r1",
    "vextract", "vfill", "vstore.v", "vstore.l",
})

# Vector instructions whose rd is a vector register.
VEC_RD = frozenset({
    "vlui", "vadd", "vsub", "vand", "vsl", "vsr", "vmul", "vsel",
    "vsli", "vsri", "vrng", "vandadd", "vload.v", "vload.l", "vfill",
})
# Vector instructions whose rs1 names a vector register.
VEC_RS1 = frozenset({
    "vadd", "vsub", "vand", "vsl", "vsr", "vmul",
    "vteq", "vtne", "vtlt", "vtge", "vsli", "vsri", "vandadd",
    "vload.l", "vextract", "vstore.l",
})
# Vector instructions whose rs2 names a vector register.
VEC_RS2 = frozenset({
    "vadd", "vsub", "vand", "vsl", "vsr", "vmul",
    "vteq", "vtne", "vtlt", "vtge", "vsel", "vstore.v", "vstore.l",
})

SCALAR_LOADS = frozenset({"lb", "lh", "lw", "lbu", "lhu"})
VECTOR_LOADS = frozenset({"vload.v", "vload.l"})


@dataclass(frozen=True)
class Instr:
    """One decoded instruction.

    Only the fields meaningful for the mnemonic are used; the rest stay at
    their defaults so that decode(encode(i)) == i holds structurally.
    """

    mnemonic: str
    rd: int = 0
    rs1: int = 0
    rs2: int = 0
    imm: int = 0
    sat: bool = False                      # vadd/vsub saturation flag
    shift: int = 0                         # vmul/vsli/vsri/vandadd shift
    mode: RoundMode = RoundMode.TO_ZERO    # vmul/vsri rounding mode
    csr: int = 0                           # csr* address

    @property
    def is_vector(self) -> bool:
        return self.mnemonic in VECTOR_MNEMONICS


def _check(cond: bool, fieldname: str, value) -> None:
    if not cond:
        raise EncodeError(f"{fieldname} out of range: {value}")


def _reg(v: int, name: str) -> int:
    _check(0 <= v < 32, name, v)
    return v


def _r_type(funct7: int, rs2: int, rs1: int, funct3: int, rd: int, opcode: int) -> int:
    return (funct7 << 25) | (rs2 << 20) | (rs1 << 15) | (funct3 << 12) | (rd << 7) | opcode


def _i_type(imm: int, rs1: int, funct3: int, rd: int, opcode: int) -> int:
    _check(-2048 <= imm <= 2047, "imm", imm)
    return ((imm & 0xFFF) << 20) | (rs1 << 15) | (funct3 << 12) | (rd << 7) | opcode


def _s_type(imm: int, rs2: int, rs1: int, funct3: int, opcode: int) -> int:
    _check(-2048 <= imm <= 2047, "imm", imm)
    imm &= 0xFFF
    return ((imm >> 5) << 25) | (rs2 << 20) | (rs1 << 15) | (funct3 << 12) | ((imm & 0x1F) << 7) | opcode


def _u_type(imm20: int, rd: int, opcode: int) -> int:
    _check(0 <= imm20 <= 0xFFFFF, "imm", imm20)
    return (imm20 << 12) | (rd << 7) | opcode


def _b_type(imm: int, rs2: int, rs1: int, funct3: int) -> int:
    _check(-4096 <= imm <= 4094 and imm % 2 == 0, "branch offset", imm)
    imm &= 0x1FFF
    return (((imm >> 12) & 1) << 31) | (((imm >> 5) & 0x3F) << 25) | (rs2 << 20) | \
        (rs1 << 15) | (funct3 << 12) | (((imm >> 1) & 0xF) << 8) | (((imm >> 11) & 1) << 7) | OP_BRANCH


def _j_type(imm: int, rd: int) -> int:
    _check(-(1 << 20) <= imm < (1 << 20) and imm % 2 == 0, "jump offset", imm)
    imm &= 0x1FFFFF
    return (((imm >> 20) & 1) << 31) | (((imm >> 1) & 0x3FF) << 21) | \
        (((imm >> 11) & 1) << 20) | (((imm >> 12) & 0xFF) << 12) | (rd << 7) | OP_JAL


_VARITH_F3 = {"vadd": 0b000, "vsl": 0b001, "vsub": 0b010, "vand": 0b011,
              "vmul": 0b100, "vsr": 0b101}
_VTEST_F3 = {"vteq": 0b000, "vtne": 0b010, "vtlt": 0b100, "vtge": 0b110}
_VLOAD_F3 = {"vload.v": 0b000, "vload.r0": 0b001, "vload.l": 0b010,
             "vload.r1": 0b101}
_SCALAR_BRANCH_F3 = {"beq": 0, "bne": 1, "blt": 4, "bge": 5, "bltu": 6, "bgeu": 7}
_SCALAR_LOAD_F3 = {"lb": 0, "lh": 1, "lw": 2, "lbu": 4, "lhu": 5}
_SCALAR_STORE_F3 = {"sb": 0, "sh": 1, "sw": 2}
_SCALAR_IMM_F3 = {"addi": 0, "slti": 2, "sltiu": 3, "xori": 4, "ori": 6, "andi": 7}
_SCALAR_OP = {  # mnemonic -> (funct3, funct7)
    "add": (0, 0), "sub": (0, 0x20), "sll": (1, 0), "slt": (2, 0),
    "sltu": (3, 0), "xor": (4, 0), "srl": (5, 0), "sra": (5, 0x20),
    "or": (6, 0), "and": (7, 0),
    "mul": (0, 1), "mulh": (1, 1), "mulhsu": (2, 1), "mulhu": (3, 1),
    "div": (4, 1), "divu": (5, 1), "rem": (6, 1), "remu": (7, 1),
}
_CSR_F3 = {"csrrw": 1, "csrrs": 2, "csrrc": 3, "csrrwi": 5, "csrrsi": 6, "csrrci": 7}


def _check_shift(shift: int) -> int:
    _check(0 <= shift <= 15, "shift", shift)
    return shift


def _check_mode(mode: RoundMode) -> int:
    _check(mode in (RoundMode.TO_ZERO, RoundMode.TO_NEAREST, RoundMode.STOCHASTIC),
           "rounding mode", mode)
    return int(mode)


def encode(i: Instr) -> int:
    """Pack one canonical instruction into its 32-bit word."""
    m = i.mnemonic
    rd, rs1, rs2 = i.rd, i.rs1, i.rs2
    if m == "vlui":
        _check(0 <= i.imm <= 0xFFFF, "imm (16-bit lane immediate)", i.imm)
        return _u_type(i.imm, _reg(rd, "rd"), OP_VLUI)
    if m in _VARITH_F3:
        if m in ("vadd", "vsub"):
            funct7 = 0x40 if i.sat else 0
        elif m == "vmul":
            funct7 = (_check_mode(i.mode) << 4) | _check_shift(i.shift)
        else:
            funct7 = 0
        return _r_type(funct7, _reg(rs2, "rs2"), _reg(rs1, "rs1"),
                       _VARITH_F3[m], _reg(rd, "rd"), OP_VARITH)
    if m in _VTEST_F3:
        return _r_type(0, _reg(rs2, "rs2"), _reg(rs1, "rs1"),
                       _VTEST_F3[m], _reg(rd, "rd"), OP_VTEST)
    if m == "vsel":
        return _r_type(0, _reg(rs2, "rs2"), _reg(rs1, "rs1"), 0,
                       _reg(rd, "rd"), OP_VSEL)
    if m == "vsli":
        return _i_type(_check_shift(i.shift), _reg(rs1, "rs1"), 0b000,
                       _reg(rd, "rd"), OP_VSHIFTI)
    if m == "vsri":
        imm = (_check_mode(i.mode) << 4) | _check_shift(i.shift)
        return _i_type(imm, _reg(rs1, "rs1"), 0b001, _reg(rd, "rd"), OP_VSHIFTI)
    if m == "vrng":
        return _r_type(0, 0, 0, 0b000, _reg(rd, "rd"), OP_VRNG)
    if m == "vandadd":
        return _r_type(_check_shift(i.shift), _reg(rs2, "rs2"), _reg(rs1, "rs1"),
                       0b001, _reg(rd, "rd"), OP_VRNG)
    if m in _VLOAD_F3:
        rd_field = _reg(rd, "rd") if m in ("vload.v", "vload.l") else 0
        return _i_type(i.imm, _reg(rs1, "rs1"), _VLOAD_F3[m], rd_field, OP_VLOAD)
    if m == "vextract":
        _check(0 <= i.imm < 32, "lane", i.imm)
        return _i_type(i.imm, _reg(rs1, "rs1"), 0b001, _reg(rd, "rd"), OP_VMOVE)
    if m == "vfill":
        return _i_type(0, _reg(rs1, "rs1"), 0b000, _reg(rd, "rd"), OP_VMOVE)
    if m == "vstore.v":
        return _s_type(i.imm, _reg(rs2, "rs2"), _reg(rs1, "rs1"), 0b000, OP_VSTORE)
    if m == "vstore.l":
        return _s_type(i.imm, _reg(rs2, "rs2"), _reg(rs1, "rs1"), 0b010, OP_VSTORE)

    # Scalar subset.
    if m == "lui":
        return _u_type(i.imm, _reg(rd, "rd"), OP_LUI)
    if m == "auipc":
        return _u_type(i.imm, _reg(rd, "rd"), OP_AUIPC)
    if m == "jal":
        return _j_type(i.imm, _reg(rd, "rd"))
    if m == "jalr":
        return _i_type(i.imm, _reg(rs1, "rs1"), 0, _reg(rd, "rd"), OP_JALR)
    if m in _SCALAR_BRANCH_F3:
        return _b_type(i.imm, _reg(rs2, "rs2"), _reg(rs1, "rs1"), _SCALAR_BRANCH_F3[m])
    if m in _SCALAR_LOAD_F3:
        return _i_type(i.imm, _reg(rs1, "rs1"), _SCALAR_LOAD_F3[m], _reg(rd, "rd"), OP_LOAD)
    if m in _SCALAR_STORE_F3:
        return _s_type(i.imm, _reg(rs2, "rs2"), _reg(rs1, "rs1"), _SCALAR_STORE_F3[m], OP_STORE)
    if m in _SCALAR_IMM_F3:
        return _i_type(i.imm, _reg(rs1, "rs1"), _SCALAR_IMM_F3[m], _reg(rd, "rd"), OP_IMM)
    if m == "slli":
        _check(0 <= i.imm < 32, "shamt", i.imm)
        return _i_type(i.imm, _reg(rs1, "rs1"), 1, _reg(rd, "rd"), OP_IMM)
    if m == "srli":
        _check(0 <= i.imm < 32, "shamt", i.imm)
        return _i_type(i.imm, _reg(rs1, "rs1"), 5, _reg(rd, "rd"), OP_IMM)
    if m == "srai":
        _check(0 <= i.imm < 32, "shamt", i.imm)
        return _i_type(i.imm | (0x20 << 5), _reg(rs1, "rs1"), 5, _reg(rd, "rd"), OP_IMM)
    if m == "clz":
        return _i_type(0x600, _reg(rs1, "rs1"), 1, _reg(rd, "rd"), OP_IMM)
    if m in _SCALAR_OP:
        f3, f7 = _SCALAR_OP[m]
        return _r_type(f7, _reg(rs2, "rs2"), _reg(rs1, "rs1"), f3, _reg(rd, "rd"), OP_OP)
    if m == "ecall":
        return _i_type(0, 0, 0, 0, OP_SYSTEM)
    if m == "ebreak":
        return _i_type(1, 0, 0, 0, OP_SYSTEM)
    if m in _CSR_F3:
        _check(0 <= i.csr <= 0xFFF, "csr", i.csr)
        if m.endswith("i"):
            _check(0 <= i.rs1 < 32, "zimm", i.rs1)
        else:
            _reg(rs1, "rs1")
        return ((i.csr & 0xFFF) << 20) | (rs1 << 15) | (_CSR_F3[m] << 12) | \
            (_reg(rd, "rd") << 7) | OP_SYSTEM
    if m == "fence":
        return _i_type(0, 0, 0, 0, OP_FENCE)
    raise EncodeError(f"unknown mnemonic {m!r}")


def _sext(value: int, bits: int) -> int:
    sign = 1 << (bits - 1)
    return (value & (sign - 1)) - (value & sign)


def _decode_fields(word: int):
    opcode = word & 0x7F
    rd = (word >> 7) & 0x1F
    funct3 = (word >> 12) & 0x7
    rs1 = (word >> 15) & 0x1F
    rs2 = (word >> 20) & 0x1F
    funct7 = (word >> 25) & 0x7F
    return opcode, rd, funct3, rs1, rs2, funct7


def _decode_mode(bits: int, word: int) -> RoundMode:
    if bits == 0b11:
        raise IllegalInstruction(word, "reserved rounding mode")
    return RoundMode(bits)


def decode(word: int) -> Instr:
    """Decode one 32-bit word or raise IllegalInstruction."""
    word &= MASK32
    opcode, rd, funct3, rs1, rs2, funct7 = _decode_fields(word)
    imm_i = _sext(word >> 20, 12)
    imm_s = _sext(((word >> 25) << 5) | rd, 12)
    imm_u = word >> 12

    if opcode == OP_VLUI:
        if imm_u > 0xFFFF:
            raise IllegalInstruction(word, "vlui immediate wider than 16 bits")
        return Instr("vlui", rd=rd, imm=imm_u)
    if opcode == OP_VARITH:
        for m, f3 in _VARITH_F3.items():
            if f3 != funct3:
                continue
            if m in ("vadd", "vsub"):
                if funct7 not in (0x00, 0x40):
                    raise IllegalInstruction(word, f"bad funct7 for {m}")
                return Instr(m, rd=rd, rs1=rs1, rs2=rs2, sat=funct7 == 0x40)
            if m == "vmul":
                if funct7 & 0x40:
                    raise IllegalInstruction(word, "bad funct7 for vmul")
                return Instr(m, rd=rd, rs1=rs1, rs2=rs2, shift=funct7 & 0xF,
                             mode=_decode_mode((funct7 >> 4) & 0x3, word))
            if funct7 != 0:
                raise IllegalInstruction(word, f"bad funct7 for {m}")
            return Instr(m, rd=rd, rs1=rs1, rs2=rs2)
        raise IllegalInstruction(word, "bad vector-arithmetic funct3")
    if opcode == OP_VTEST:
        for m, f3 in _VTEST_F3.items():
            if f3 == funct3:
                if funct7 != 0:
                    raise IllegalInstruction(word, f"bad funct7 for {m}")
                return Instr(m, rd=rd, rs1=rs1, rs2=rs2)
        raise IllegalInstruction(word, "bad vector-test funct3")
    if opcode == OP_VSEL:
        if funct3 != 0 or funct7 != 0:
            raise IllegalInstruction(word, "bad vsel encoding")
        return Instr("vsel", rd=rd, rs1=rs1, rs2=rs2)
    if opcode == OP_VSHIFTI:
        raw = word >> 20
        if funct3 == 0b000:
            if raw > 0xF:
                raise IllegalInstruction(word, "bad vsli immediate")
            return Instr("vsli", rd=rd, rs1=rs1, shift=raw & 0xF)
        if funct3 == 0b001:
            if raw > 0x3F:
                raise IllegalInstruction(word, "bad vsri immediate")
            return Instr("vsri", rd=rd, rs1=rs1, shift=raw & 0xF,
                         mode=_decode_mode((raw >> 4) & 0x3, word))
        raise IllegalInstruction(word, "bad immediate-shift funct3")
    if opcode == OP_VRNG:
        if funct3 == 0b000:
            if funct7 != 0 or rs1 != 0 or rs2 != 0:
                raise IllegalInstruction(word, "bad vrng encoding")
            return Instr("vrng", rd=rd)
        if funct3 == 0b001:
            if funct7 & 0x70:
                raise IllegalInstruction(word, "bad vandadd funct7")
            return Instr("vandadd", rd=rd, rs1=rs1, rs2=rs2, shift=funct7 & 0xF)
        raise IllegalInstruction(word, "bad rng-group funct3")
    if opcode == OP_VLOAD:
        for m, f3 in _VLOAD_F3.items():
            if f3 == funct3:
                if m in ("vload.r0", "vload.r1") and rd != 0:
                    raise IllegalInstruction(word, f"{m} rd must be 0")
                return Instr(m, rd=rd if m in ("vload.v", "vload.l") else 0,
                             rs1=rs1, imm=imm_i)
        raise IllegalInstruction(word, "bad vector-load funct3")
    if opcode == OP_VMOVE:
        if funct3 == 0b000:
            if (word >> 20) != 0:
                raise IllegalInstruction(word, "vfill immediate must be 0")
            return Instr("vfill", rd=rd, rs1=rs1)
        if funct3 == 0b001:
            lane = word >> 20
            if lane > 31:
                raise IllegalInstruction(word, "vextract lane out of range")
            return Instr("vextract", rd=rd, rs1=rs1, imm=lane)
        raise IllegalInstruction(word, "bad move-group funct3")
    if opcode == OP_VSTORE:
        if funct3 == 0b000:
            return Instr("vstore.v", rs1=rs1, rs2=rs2, imm=imm_s)
        if funct3 == 0b010:
            return Instr("vstore.l", rs1=rs1, rs2=rs2, imm=imm_s)
        raise IllegalInstruction(word, "bad vector-store funct3")

    if opcode == OP_LUI:
        return Instr("lui", rd=rd, imm=imm_u)
    if opcode == OP_AUIPC:
        return Instr("auipc", rd=rd, imm=imm_u)
    if opcode == OP_JAL:
        imm = (((word >> 31) & 1) << 20) | (((word >> 21) & 0x3FF) << 1) | \
            (((word >> 20) & 1) << 11) | (((word >> 12) & 0xFF) << 12)
        return Instr("jal", rd=rd, imm=_sext(imm, 21))
    if opcode == OP_JALR:
        if funct3 != 0:
            raise IllegalInstruction(word, "bad jalr funct3")
        return Instr("jalr", rd=rd, rs1=rs1, imm=imm_i)
    if opcode == OP_BRANCH:
        imm = (((word >> 31) & 1) << 12) | (((word >> 7) & 1) << 11) | \
            (((word >> 25) & 0x3F) << 5) | (((word >> 8) & 0xF) << 1)
        imm = _sext(imm, 13)
        for m, f3 in _SCALAR_BRANCH_F3.items():
            if f3 == funct3:
                return Instr(m, rs1=rs1, rs2=rs2, imm=imm)
        raise IllegalInstruction(word, "bad branch funct3")
    if opcode == OP_LOAD:
        for m, f3 in _SCALAR_LOAD_F3.items():
            if f3 == funct3:
                return Instr(m, rd=rd, rs1=rs1, imm=imm_i)
        raise IllegalInstruction(word, "bad load funct3")
    if opcode == OP_STORE:
        for m, f3 in _SCALAR_STORE_F3.items():
            if f3 == funct3:
                return Instr(m, rs1=rs1, rs2=rs2, imm=imm_s)
        raise IllegalInstruction(word, "bad store funct3")
    if opcode == OP_IMM:
        if funct3 == 1:
            if funct7 == 0:
                return Instr("slli", rd=rd, rs1=rs1, imm=rs2)
            if funct7 == 0x30 and rs2 == 0:
                return Instr("clz", rd=rd, rs1=rs1)
            raise IllegalInstruction(word, "bad funct7 for shift-left/clz")
        if funct3 == 5:
            if funct7 == 0:
                return Instr("srli", rd=rd, rs1=rs1, imm=rs2)
            if funct7 == 0x20:
                return Instr("srai", rd=rd, rs1=rs1, imm=rs2)
            raise IllegalInstruction(word, "bad funct7 for shift-right")
        for m, f3 in _SCALAR_IMM_F3.items():
            if f3 == funct3:
                return Instr(m, rd=rd, rs1=rs1, imm=imm_i)
        raise IllegalInstruction(word, "bad op-imm funct3")
    if opcode == OP_OP:
        for m, (f3, f7) in _SCALAR_OP.items():
            if f3 == funct3 and f7 == funct7:
                return Instr(m, rd=rd, rs1=rs1, rs2=rs2)
        raise IllegalInstruction(word, "bad op funct3/funct7")
    if opcode == OP_SYSTEM:
        if funct3 == 0:
            if word == 0x00000073:
                return Instr("ecall")
            if word == 0x00100073:
                return Instr("ebreak")
            raise IllegalInstruction(word, "bad system encoding")
        for m, f3 in _CSR_F3.items():
            if f3 == funct3:
                return Instr(m, rd=rd, rs1=rs1, csr=word >> 20)
        raise IllegalInstruction(word, "bad csr funct3")
    if opcode == OP_FENCE:
        return Instr("fence")
    raise IllegalInstruction(word, "unknown opcode")
