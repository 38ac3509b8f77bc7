"""Two-pass assembler and disassembler for the scalar + vector ISA.

Sections map onto the four address spaces of the machine: ``.text``
(instruction memory), ``.data`` (scalar data), ``.vdata`` (vector memory)
and ``.lldata`` (lane-local memory, per-lane replicated unless a
``.lane`` directive narrows it).  The flat binary image layout is:
magic ``FENN``, u32 version, u32 section count, then per section
u32 space / u32 lane / u32 base / u32 length followed by the bytes.
"""

from __future__ import annotations

import re
import struct
from dataclasses import dataclass, field

from . import isa
from .fxp import RoundMode
from .isa import EncodeError, Instr

SPACE_IMEM = 0
SPACE_DMEM = 1
SPACE_VMEM = 2
SPACE_LLM = 3

SPACE_NAMES = {SPACE_IMEM: "imem", SPACE_DMEM: "dmem",
               SPACE_VMEM: "vmem", SPACE_LLM: "llm"}

LANE_ALL = 0xFFFFFFFF
IMAGE_MAGIC = b"FENN"
IMAGE_VERSION = 1

_ABI_XREGS = {
    "zero": 0, "ra": 1, "sp": 2, "gp": 3, "tp": 4,
    "t0": 5, "t1": 6, "t2": 7, "s0": 8, "fp": 8, "s1": 9,
    "a0": 10, "a1": 11, "a2": 12, "a3": 13, "a4": 14, "a5": 15,
    "a6": 16, "a7": 17, "s2": 18, "s3": 19, "s4": 20, "s5": 21,
    "s6": 22, "s7": 23, "s8": 24, "s9": 25, "s10": 26, "s11": 27,
    "t3": 28, "t4": 29, "t5": 30, "t6": 31,
}

_MODE_SUFFIX = {"rz": RoundMode.TO_ZERO, "rn": RoundMode.TO_NEAREST,
                "rs": RoundMode.STOCHASTIC}


class AsmError(Exception):
    def __init__(self, msg: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {msg}" if line is not None else msg)


@dataclass
class Section:
    space: int
    lane: int = LANE_ALL
    base: int = 0
    data: bytearray = field(default_factory=bytearray)


@dataclass
class ProgramImage:
    sections: list[Section] = field(default_factory=list)
    symbols: dict[str, tuple[int, int]] = field(default_factory=dict)

    def section(self, space: int, lane: int = LANE_ALL) -> Section | None:
        for s in self.sections:
            if s.space == space and s.lane == lane:
                return s
        return None

    def to_bytes(self) -> bytes:
        out = bytearray(IMAGE_MAGIC)
        out += struct.pack("<II", IMAGE_VERSION, len(self.sections))
        for s in self.sections:
            out += struct.pack("<IIII", s.space, s.lane, s.base, len(s.data))
            out += bytes(s.data)
        out += struct.pack("<I", len(self.symbols))
        for name, (space, addr) in self.symbols.items():
            raw = name.encode()
            out += struct.pack("<III", len(raw), space, addr) + raw
        return bytes(out)

    @classmethod
    def from_bytes(cls, blob: bytes) -> "ProgramImage":
        if blob[:4] != IMAGE_MAGIC:
            raise ValueError("bad image magic")
        version, nsec = struct.unpack_from("<II", blob, 4)
        if version != IMAGE_VERSION:
            raise ValueError(f"unsupported image version {version}")
        img = cls()
        off = 12
        for _ in range(nsec):
            space, lane, base, length = struct.unpack_from("<IIII", blob, off)
            off += 16
            img.sections.append(Section(space, lane, base,
                                        bytearray(blob[off:off + length])))
            off += length
        if off < len(blob):
            nsym, = struct.unpack_from("<I", blob, off)
            off += 4
            for _ in range(nsym):
                nlen, space, addr = struct.unpack_from("<III", blob, off)
                off += 12
                name = blob[off:off + nlen].decode()
                off += nlen
                img.symbols[name] = (space, addr)
        return img


def parse_xreg(tok: str, line: int | None = None) -> int:
    tok = tok.strip().lower()
    if tok in _ABI_XREGS:
        return _ABI_XREGS[tok]
    m = re.fullmatch(r"x(\d+)", tok)
    if m and int(m.group(1)) < 32:
        return int(m.group(1))
    raise AsmError(f"bad scalar register {tok!r}", line)


def parse_vreg(tok: str, line: int | None = None) -> int:
    m = re.fullmatch(r"v(\d+)", tok.strip().lower())
    if m and int(m.group(1)) < 32:
        return int(m.group(1))
    raise AsmError(f"bad vector register {tok!r}", line)


_EXPR_OK = re.compile(r"^[\d\sxXa-fA-F+\-*()<>&|%]*$")


def _eval_expr(expr: str, symbols: dict[str, int], line: int | None = None) -> int:
    """Evaluate an integer operand expression: literals, symbols, + - * << >> & |."""
    def sub(m):
        name = m.group(0)
        if re.fullmatch(r"0[xX][0-9a-fA-F]+|\d+", name):
            return name
        if name in symbols:
            return str(symbols[name])
        raise AsmError(f"undefined symbol {name!r}", line)

    text = re.sub(r"[A-Za-z_.$][\w.$]*|0[xX][0-9a-fA-F]+|\d+", sub, expr.strip())
    if not _EXPR_OK.match(text):
        raise AsmError(f"bad expression {expr!r}", line)
    try:
        return int(eval(text, {"__builtins__": {}}, {}))  # arithmetic only
    except Exception as e:
        raise AsmError(f"bad expression {expr!r}: {e}", line)


def _split_ops(rest: str) -> list[str]:
    rest = rest.strip()
    if not rest:
        return []
    return [p.strip() for p in rest.split(",")]


_MEM_RE = re.compile(r"^(.*)\(\s*([\w.$]+)\s*\)$")


def _parse_mem(tok: str, line: int | None):
    m = _MEM_RE.match(tok.strip())
    if not m:
        raise AsmError(f"expected offset(reg), got {tok!r}", line)
    off = m.group(1).strip() or "0"
    return off, m.group(2)


_R3 = {"add", "sub", "sll", "slt", "sltu", "xor", "srl", "sra", "or", "and",
       "mul", "mulh", "mulhsu", "mulhu", "div", "divu", "rem", "remu"}
_IARITH = {"addi", "slti", "sltiu", "xori", "ori", "andi", "slli", "srli", "srai"}
_BRANCHES = {"beq", "bne", "blt", "bge", "bltu", "bgeu"}
_VR3 = {"vadd", "vsub", "vand", "vsl", "vsr"}


class Assembler:
    """Two-pass assembler producing a ProgramImage."""

    def __init__(self):
        self.symbols: dict[str, int] = {}
        self.sym_space: dict[str, tuple[int, int]] = {}
        self.sections: dict[tuple[int, int], bytearray] = {}
        self.items: list[tuple] = []   # (space, lane, offset, line_no, text)
        self.space = SPACE_IMEM
        self.lane = LANE_ALL

    def _buf(self) -> bytearray:
        return self.sections.setdefault((self.space, self.lane), bytearray())

    # ---- pass 1 -------------------------------------------------------

    def _pseudo_size(self, mn: str, ops: list[str]) -> int:
        if mn == "li":
            try:
                v = _eval_expr(ops[1], self.symbols)
            except AsmError:
                return 2
            return 1 if -2048 <= v <= 2047 else 2
        if mn == "la":
            return 2
        return 1

    def _scan_line(self, raw: str, line_no: int) -> None:
        text = re.split(r"#|//", raw, 1)[0].strip()
        while True:
            m = re.match(r"^([A-Za-z_.$][\w.$]*)\s*:\s*", text)
            if not m:
                break
            label = m.group(1)
            if label in self.symbols:
                raise AsmError(f"duplicate label {label!r}", line_no)
            addr = len(self._buf())
            self.symbols[label] = addr
            self.sym_space[label] = (self.space, addr)
            text = text[m.end():]
        if not text:
            return
        if text.startswith("."):
            self._directive(text, line_no)
            return
        parts = text.split(None, 1)
        mn = parts[0].lower()
        ops = _split_ops(parts[1]) if len(parts) > 1 else []
        if self.space != SPACE_IMEM:
            raise AsmError("instructions only allowed in .text", line_no)
        nwords = self._pseudo_size(mn, ops)
        buf = self._buf()
        self.items.append((self.space, self.lane, len(buf), line_no, mn, ops, nwords))
        buf.extend(b"\0" * (4 * nwords))

    def _directive(self, text: str, line_no: int) -> None:
        parts = text.split(None, 1)
        d = parts[0].lower()
        rest = parts[1] if len(parts) > 1 else ""
        if d == ".text":
            self.space, self.lane = SPACE_IMEM, LANE_ALL
        elif d == ".data":
            self.space, self.lane = SPACE_DMEM, LANE_ALL
        elif d == ".vdata":
            self.space, self.lane = SPACE_VMEM, LANE_ALL
        elif d == ".lldata":
            self.space, self.lane = SPACE_LLM, LANE_ALL
        elif d == ".lane":
            if self.space != SPACE_LLM:
                raise AsmError(".lane only valid in .lldata", line_no)
            arg = rest.strip().lower()
            self.lane = LANE_ALL if arg == "all" else _eval_expr(arg, self.symbols, line_no)
            if self.lane != LANE_ALL and not 0 <= self.lane < 32:
                raise AsmError(f"lane {self.lane} out of range", line_no)
        elif d == ".equ":
            ops = _split_ops(rest)
            if len(ops) != 2:
                raise AsmError(".equ needs name, value", line_no)
            if ops[0] in self.symbols:
                raise AsmError(f"duplicate symbol {ops[0]!r}", line_no)
            self.symbols[ops[0]] = _eval_expr(ops[1], self.symbols, line_no)
        elif d in (".word", ".half", ".byte"):
            size = {".word": 4, ".half": 2, ".byte": 1}[d]
            buf = self._buf()
            for op in _split_ops(rest):
                self.items.append((self.space, self.lane, len(buf), line_no,
                                   d, [op], 0))
                buf.extend(b"\0" * size)
        elif d == ".align":
            n = _eval_expr(rest, self.symbols, line_no)
            buf = self._buf()
            align = 1 << n
            pad = (-len(buf)) % align
            buf.extend(b"\0" * pad)
        elif d == ".zero":
            n = _eval_expr(rest, self.symbols, line_no)
            self._buf().extend(b"\0" * n)
        else:
            raise AsmError(f"unknown directive {d!r}", line_no)

    # ---- pass 2 -------------------------------------------------------

    def _resolve(self, expr: str, line: int) -> int:
        return _eval_expr(expr, self.symbols, line)

    def _branch_target(self, tok: str, pc: int, line: int) -> int:
        tok = tok.strip()
        if re.fullmatch(r"-?(0[xX][0-9a-fA-F]+|\d+)", tok):
            return int(tok, 0)
        if tok not in self.symbols:
            raise AsmError(f"undefined label {tok!r}", line)
        return self.symbols[tok] - pc

    def _encode_one(self, mn: str, ops: list[str], pc: int, line: int) -> list[Instr]:
        try:
            return self._encode_inner(mn, ops, pc, line)
        except (IndexError, ValueError):
            raise AsmError(f"bad operands for {mn!r}: {ops}", line)

    def _encode_inner(self, mn: str, ops, pc, line) -> list[Instr]:
        ev = lambda s: self._resolve(s, line)
        # Pseudo-instructions first.
        if mn == "nop":
            return [Instr("addi")]
        if mn == "mv":
            return [Instr("addi", rd=parse_xreg(ops[0], line), rs1=parse_xreg(ops[1], line))]
        if mn in ("li", "la"):
            rd = parse_xreg(ops[0], line)
            v = ev(ops[1]) & 0xFFFFFFFF
            if v >= 0x80000000:
                v -= 1 << 32
            if mn == "li" and -2048 <= v <= 2047:
                return [Instr("addi", rd=rd, imm=v)]
            lo = ((v + 0x800) & 0xFFF) - 0x800
            hi = ((v - lo) >> 12) & 0xFFFFF
            return [Instr("lui", rd=rd, imm=hi), Instr("addi", rd=rd, rs1=rd, imm=lo)]
        if mn == "j":
            return [Instr("jal", rd=0, imm=self._branch_target(ops[0], pc, line))]
        if mn == "jr":
            return [Instr("jalr", rd=0, rs1=parse_xreg(ops[0], line))]
        if mn == "ret":
            return [Instr("jalr", rd=0, rs1=1)]
        if mn == "call":
            return [Instr("jal", rd=1, imm=self._branch_target(ops[0], pc, line))]
        if mn == "beqz":
            return [Instr("beq", rs1=parse_xreg(ops[0], line),
                          imm=self._branch_target(ops[1], pc, line))]
        if mn == "bnez":
            return [Instr("bne", rs1=parse_xreg(ops[0], line),
                          imm=self._branch_target(ops[1], pc, line))]
        if mn == "csrr":
            return [Instr("csrrs", rd=parse_xreg(ops[0], line), csr=self._csr(ops[1], line))]
        if mn == "csrw":
            return [Instr("csrrw", csr=self._csr(ops[0], line),
                          rs1=parse_xreg(ops[1], line))]
        if mn == "csrwi":
            uimm = ev(ops[1])
            if not 0 <= uimm < 32:
                raise AsmError(f"csrwi immediate {uimm} out of range", line)
            return [Instr("csrrwi", csr=self._csr(ops[0], line), rs1=uimm)]

        # Vector instructions.
        base, _, suffix = mn.partition(".")
        if base in _VR3 and mn not in ("vload.v",):
            sat = suffix == "s"
            if suffix and not sat:
                raise AsmError(f"unknown suffix on {mn!r}", line)
            if sat and base not in ("vadd", "vsub"):
                raise AsmError(f"{base} has no saturating form", line)
            return [Instr(base, rd=parse_vreg(ops[0], line),
                          rs1=parse_vreg(ops[1], line),
                          rs2=parse_vreg(ops[2], line), sat=sat)]
        if base == "vmul":
            mode = _MODE_SUFFIX[suffix] if suffix else RoundMode.TO_ZERO
            return [Instr("vmul", rd=parse_vreg(ops[0], line),
                          rs1=parse_vreg(ops[1], line), rs2=parse_vreg(ops[2], line),
                          shift=ev(ops[3]), mode=mode)]
        if mn in ("vteq", "vtne", "vtlt", "vtge"):
            return [Instr(mn, rd=parse_xreg(ops[0], line),
                          rs1=parse_vreg(ops[1], line), rs2=parse_vreg(ops[2], line))]
        if mn == "vsel":
            return [Instr("vsel", rd=parse_vreg(ops[0], line),
                          rs1=parse_xreg(ops[1], line), rs2=parse_vreg(ops[2], line))]
        if mn == "vsli":
            return [Instr("vsli", rd=parse_vreg(ops[0], line),
                          rs1=parse_vreg(ops[1], line), shift=ev(ops[2]))]
        if base == "vsri":
            mode = _MODE_SUFFIX[suffix] if suffix else RoundMode.TO_ZERO
            return [Instr("vsri", rd=parse_vreg(ops[0], line),
                          rs1=parse_vreg(ops[1], line), shift=ev(ops[2]), mode=mode)]
        if mn == "vrng":
            return [Instr("vrng", rd=parse_vreg(ops[0], line))]
        if mn == "vandadd":
            return [Instr("vandadd", rd=parse_vreg(ops[0], line),
                          rs1=parse_vreg(ops[1], line), rs2=parse_xreg(ops[2], line),
                          shift=ev(ops[3]))]
        if mn == "vlui":
            return [Instr("vlui", rd=parse_vreg(ops[0], line), imm=ev(ops[1]))]
        if mn in ("vload.v", "vload.l"):
            off, reg = _parse_mem(ops[1], line)
            rs1 = parse_xreg(reg, line) if mn == "vload.v" else parse_vreg(reg, line)
            return [Instr(mn, rd=parse_vreg(ops[0], line), rs1=rs1, imm=ev(off))]
        if mn in ("vload.r0", "vload.r1"):
            off, reg = _parse_mem(ops[0], line)
            return [Instr(mn, rs1=parse_xreg(reg, line), imm=ev(off))]
        if mn in ("vstore.v", "vstore.l"):
            off, reg = _parse_mem(ops[1], line)
            rs1 = parse_xreg(reg, line) if mn == "vstore.v" else parse_vreg(reg, line)
            return [Instr(mn, rs2=parse_vreg(ops[0], line), rs1=rs1, imm=ev(off))]
        if mn == "vextract":
            return [Instr("vextract", rd=parse_xreg(ops[0], line),
                          rs1=parse_vreg(ops[1], line), imm=ev(ops[2]))]
        if mn == "vfill":
            return [Instr("vfill", rd=parse_vreg(ops[0], line),
                          rs1=parse_xreg(ops[1], line))]

        # Scalar instructions.
        if mn in _R3:
            return [Instr(mn, rd=parse_xreg(ops[0], line),
                          rs1=parse_xreg(ops[1], line), rs2=parse_xreg(ops[2], line))]
        if mn in _IARITH:
            return [Instr(mn, rd=parse_xreg(ops[0], line),
                          rs1=parse_xreg(ops[1], line), imm=ev(ops[2]))]
        if mn == "clz":
            return [Instr("clz", rd=parse_xreg(ops[0], line),
                          rs1=parse_xreg(ops[1], line))]
        if mn in ("lb", "lh", "lw", "lbu", "lhu"):
            off, reg = _parse_mem(ops[1], line)
            return [Instr(mn, rd=parse_xreg(ops[0], line),
                          rs1=parse_xreg(reg, line), imm=ev(off))]
        if mn in ("sb", "sh", "sw"):
            off, reg = _parse_mem(ops[1], line)
            return [Instr(mn, rs2=parse_xreg(ops[0], line),
                          rs1=parse_xreg(reg, line), imm=ev(off))]
        if mn in ("lui", "auipc"):
            return [Instr(mn, rd=parse_xreg(ops[0], line), imm=ev(ops[1]))]
        if mn == "jal":
            if len(ops) == 1:
                return [Instr("jal", rd=1, imm=self._branch_target(ops[0], pc, line))]
            return [Instr("jal", rd=parse_xreg(ops[0], line),
                          imm=self._branch_target(ops[1], pc, line))]
        if mn == "jalr":
            if len(ops) == 2 and "(" in ops[1]:
                off, reg = _parse_mem(ops[1], line)
                return [Instr("jalr", rd=parse_xreg(ops[0], line),
                              rs1=parse_xreg(reg, line), imm=ev(off))]
            return [Instr("jalr", rd=parse_xreg(ops[0], line),
                          rs1=parse_xreg(ops[1], line),
                          imm=ev(ops[2]) if len(ops) > 2 else 0)]
        if mn in _BRANCHES:
            return [Instr(mn, rs1=parse_xreg(ops[0], line),
                          rs2=parse_xreg(ops[1], line),
                          imm=self._branch_target(ops[2], pc, line))]
        if mn in ("ecall", "ebreak", "fence"):
            return [Instr(mn)]
        if mn in ("csrrw", "csrrs", "csrrc"):
            return [Instr(mn, rd=parse_xreg(ops[0], line), csr=self._csr(ops[1], line),
                          rs1=parse_xreg(ops[2], line))]
        if mn in ("csrrwi", "csrrsi", "csrrci"):
            return [Instr(mn, rd=parse_xreg(ops[0], line), csr=self._csr(ops[1], line),
                          rs1=ev(ops[2]))]
        raise AsmError(f"unknown mnemonic {mn!r}", line)

    def _csr(self, tok: str, line: int) -> int:
        tok = tok.strip().lower()
        if tok in isa.CSR_NAMES:
            return isa.CSR_NAMES[tok]
        return self._resolve(tok, line)

    def assemble(self, source: str) -> ProgramImage:
        for line_no, raw in enumerate(source.splitlines(), 1):
            self._scan_line(raw, line_no)
        for space, lane, offset, line_no, mn, ops, nwords in self.items:
            buf = self.sections[(space, lane)]
            if mn in (".word", ".half", ".byte"):
                size = {".word": 4, ".half": 2, ".byte": 1}[mn]
                v = self._resolve(ops[0], line_no)
                buf[offset:offset + size] = (v & ((1 << (8 * size)) - 1)).to_bytes(size, "little")
                continue
            instrs = self._encode_one(mn, ops, offset, line_no)
            while len(instrs) < nwords:   # symbolic li that shrank in pass 2
                instrs.append(Instr("addi"))
            for k, ins in enumerate(instrs):
                try:
                    word = isa.encode(ins)
                except EncodeError as e:
                    raise AsmError(str(e), line_no)
                buf[offset + 4 * k:offset + 4 * k + 4] = struct.pack("<I", word)
        img = ProgramImage()
        for (space, lane), data in sorted(self.sections.items()):
            img.sections.append(Section(space, lane, 0, data))
        img.symbols = dict(self.sym_space)
        return img


def assemble(source: str) -> ProgramImage:
    return Assembler().assemble(source)


def _fmt_mode(mode: RoundMode) -> str:
    return {RoundMode.TO_ZERO: ".rz", RoundMode.TO_NEAREST: ".rn",
            RoundMode.STOCHASTIC: ".rs"}[mode]


def disassemble(word: int) -> str:
    """Canonical text for one word; illegal words fall back to .word."""
    try:
        i = isa.decode(word)
    except isa.IllegalInstruction:
        return f".word 0x{word & 0xFFFFFFFF:08x}"
    return format_instr(i)


def format_instr(i: Instr) -> str:
    m = i.mnemonic
    x = lambda r: f"x{r}"
    v = lambda r: f"v{r}"
    if m in _VR3:
        mn = m + (".s" if i.sat else "")
        return f"{mn} {v(i.rd)}, {v(i.rs1)}, {v(i.rs2)}"
    if m == "vmul":
        return f"vmul{_fmt_mode(i.mode)} {v(i.rd)}, {v(i.rs1)}, {v(i.rs2)}, {i.shift}"
    if m in ("vteq", "vtne", "vtlt", "vtge"):
        return f"{m} {x(i.rd)}, {v(i.rs1)}, {v(i.rs2)}"
    if m == "vsel":
        return f"vsel {v(i.rd)}, {x(i.rs1)}, {v(i.rs2)}"
    if m == "vsli":
        return f"vsli {v(i.rd)}, {v(i.rs1)}, {i.shift}"
    if m == "vsri":
        return f"vsri{_fmt_mode(i.mode)} {v(i.rd)}, {v(i.rs1)}, {i.shift}"
    if m == "vrng":
        return f"vrng {v(i.rd)}"
    if m == "vandadd":
        return f"vandadd {v(i.rd)}, {v(i.rs1)}, {x(i.rs2)}, {i.shift}"
    if m == "vlui":
        return f"vlui {v(i.rd)}, 0x{i.imm:x}"
    if m == "vload.v":
        return f"vload.v {v(i.rd)}, {i.imm}({x(i.rs1)})"
    if m == "vload.l":
        return f"vload.l {v(i.rd)}, {i.imm}({v(i.rs1)})"
    if m in ("vload.r0", "vload.r1"):
        return f"{m} {i.imm}({x(i.rs1)})"
    if m == "vstore.v":
        return f"vstore.v {v(i.rs2)}, {i.imm}({x(i.rs1)})"
    if m == "vstore.l":
        return f"vstore.l {v(i.rs2)}, {i.imm}({v(i.rs1)})"
    if m == "vextract":
        return f"vextract {x(i.rd)}, {v(i.rs1)}, {i.imm}"
    if m == "vfill":
        return f"vfill {v(i.rd)}, {x(i.rs1)}"
    if m in _R3:
        return f"{m} {x(i.rd)}, {x(i.rs1)}, {x(i.rs2)}"
    if m in _IARITH:
        return f"{m} {x(i.rd)}, {x(i.rs1)}, {i.imm}"
    if m == "clz":
        return f"clz {x(i.rd)}, {x(i.rs1)}"
    if m in ("lb", "lh", "lw", "lbu", "lhu"):
        return f"{m} {x(i.rd)}, {i.imm}({x(i.rs1)})"
    if m in ("sb", "sh", "sw"):
        return f"{m} {x(i.rs2)}, {i.imm}({x(i.rs1)})"
    if m in ("lui", "auipc"):
        return f"{m} {x(i.rd)}, 0x{i.imm:x}"
    if m == "jal":
        return f"jal {x(i.rd)}, {i.imm}"
    if m == "jalr":
        return f"jalr {x(i.rd)}, {i.imm}({x(i.rs1)})"
    if m in _BRANCHES:
        return f"{m} {x(i.rs1)}, {x(i.rs2)}, {i.imm}"
    if m in ("ecall", "ebreak", "fence"):
        return m
    if m in ("csrrw", "csrrs", "csrrc"):
        return f"{m} {x(i.rd)}, 0x{i.csr:x}, {x(i.rs1)}"
    if m in ("csrrwi", "csrrsi", "csrrci"):
        return f"{m} {x(i.rd)}, 0x{i.csr:x}, {i.rs1}"
    return f"<{m}>"
