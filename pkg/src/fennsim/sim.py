"""Functional + cycle-approximate simulator of one accelerator core.

The machine couples a scalar RV32IM/CLZ/Zicsr pipeline with a 32-lane,
16-bit vector unit, four memory spaces (instruction, scalar data, vector,
lane-local), per-lane RNG seed registers and an abstract DMA engine that
copies between a large external memory and vector memory.

Two execution engines share one :class:`Machine`:

* :class:`PipelinedCore` - the production engine.  Instructions execute
  functionally in order (operand forwarding makes architectural values
  equal to sequential semantics); a timing model charges one cycle per
  instruction plus load-use stalls and taken-branch bubbles.  Decoded
  instructions are cached as closures so long runs stay fast.
* :class:`RefCore` - a naive big-step interpreter used as the other half
  of the differential test; it charges exactly one cycle per instruction.

All timing constants live in :class:`CycleModel` so cycle-sensitive tests
have a single source of truth.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

from . import isa
from .asm import (SPACE_DMEM, SPACE_IMEM, SPACE_LLM, SPACE_VMEM, LANE_ALL,
                  ProgramImage, Section, disassemble)
from .prng import LaneRng

NUM_LANES = 32
_LANE_IDX = np.arange(NUM_LANES)
_BIT_WEIGHTS = (1 << np.arange(NUM_LANES, dtype=np.uint64))


@dataclass(frozen=True)
class CycleModel:
    """Every decided timing constant of the core, in one place.

    The branch penalty and the scalar-result path cost are conventions the
    hardware description leaves open; they are fixed here so cycle tests
    are stable, and can be re-fit against hardware measurements later.
    """

    pipeline_fill: int = 2        # cycles from reset/entry to first retire
    branch_taken_penalty: int = 2  # extra cycles for taken branches and jumps
    load_use_stall: int = 1       # memory load feeding the very next instruction
    dma_latency: int = 60         # external-memory latency in core cycles
    dma_cycles_per_vector: int = 2  # one 64-byte vector arrives every 2 cycles

    def dma_completion(self, issue_cycle: int, nbytes: int) -> int:
        nvec = -(-nbytes // 64)
        return issue_cycle + self.dma_latency + self.dma_cycles_per_vector * nvec


DEFAULT_CYCLES = CycleModel()


@dataclass
class MemConfig:
    imem_bytes: int = 65536
    dmem_bytes: int = 131072
    vmem_bytes: int = 1572864
    llm_halfwords_per_lane: int = 1024
    external_bytes: int = 1 << 28

    def __post_init__(self):
        for name in ("imem_bytes", "dmem_bytes", "external_bytes"):
            v = getattr(self, name)
            if v & (v - 1):
                raise ValueError(f"{name} must be a power of two")
        if self.vmem_bytes % 64:
            raise ValueError("vmem_bytes must be a multiple of 64")


class SimTrap(Exception):
    """Architectural trap: illegal instruction, bad access, DMA misuse."""

    def __init__(self, reason: str, pc: int = 0, word: int = 0):
        self.reason = reason
        self.pc = pc
        self.word = word
        super().__init__(f"trap at pc=0x{pc:08x} (word 0x{word:08x}): {reason}")


@dataclass
class ExitInfo:
    exit_code: int
    cycles: int
    instret: int
    region_cycles: dict[int, int]
    timed_out: bool = False


@dataclass
class PerfReport:
    total_cycles: int
    instret: int
    region_cycles: dict[int, int] = field(default_factory=dict)


class DmaEngine:
    """Single-channel DMA with a one-deep queue.

    A transfer becomes visible in its destination exactly at its
    completion cycle.  ``diagnostic`` mode turns overlapping compute
    accesses into traps instead of silently returning stale data.
    """

    def __init__(self, machine: "Machine", timing: CycleModel):
        self.m = machine
        self.timing = timing
        self.ext_addr = 0
        self.local_addr = 0
        self.nbytes = 0
        self.inflight = None   # (direction, ext, local, nbytes, complete_cycle)
        self.queued = None     # (direction, ext, local, nbytes)
        self.diagnostic = True
        self.stall_log: list[tuple[int, int]] = []

    def busy(self, now: int) -> bool:
        self.sync(now)
        return self.inflight is not None

    def start(self, direction: int, now: int) -> None:
        self.sync(now)
        params = (direction, self.ext_addr, self.local_addr, self.nbytes)
        if self.inflight is None:
            self._launch(params, now)
        elif self.queued is None:
            self.queued = params
        else:
            raise SimTrap("DMA start while channel and queue are both busy")

    def _launch(self, params, issue_cycle: int) -> None:
        direction, ext, local, nbytes = params
        complete = self.timing.dma_completion(issue_cycle, nbytes)
        self.inflight = (direction, ext, local, nbytes, complete)

    def sync(self, now: int) -> None:
        while self.inflight is not None and now >= self.inflight[4]:
            direction, ext, local, nbytes, complete = self.inflight
            self._apply(direction, ext, local, nbytes)
            self.inflight = None
            if self.queued is not None:
                params, self.queued = self.queued, None
                self._launch(params, complete)

    def flush(self) -> None:
        self.sync(1 << 62)

    def _apply(self, direction: int, ext: int, local: int, nbytes: int) -> None:
        if nbytes == 0:
            return
        m = self.m
        if ext + nbytes > len(m.ext) or local + nbytes > m.cfg.vmem_bytes:
            raise SimTrap("DMA transfer outside memory bounds")
        vbytes = m.vmem.view(np.uint8)
        if direction == 0:   # external -> vector memory
            vbytes[local:local + nbytes] = m.ext[ext:ext + nbytes]
        else:                # vector memory -> external
            m.ext[ext:ext + nbytes] = vbytes[local:local + nbytes]

    def check_vmem_access(self, addr: int, nbytes: int, now: int, is_write: bool) -> None:
        self.sync(now)
        if self.inflight is None or not self.diagnostic:
            return
        direction, _, local, tbytes, _ = self.inflight
        if tbytes == 0:
            return
        overlaps = addr < local + tbytes and local < addr + nbytes
        if not overlaps:
            return
        if direction == 0 or is_write:
            raise SimTrap("vector-memory access races in-flight DMA transfer")


class Machine:
    """Complete architectural state of one core."""

    def __init__(self, cfg: MemConfig | None = None,
                 timing: CycleModel = DEFAULT_CYCLES):
        self.cfg = cfg or MemConfig()
        self.timing = timing
        self.pc = 0
        self.x = [0] * 32
        self.v = np.zeros((32, NUM_LANES), dtype=np.int16)
        self.rng = LaneRng()
        self.imem = bytearray(self.cfg.imem_bytes)
        self.dmem = bytearray(self.cfg.dmem_bytes)
        self.vmem = np.zeros(self.cfg.vmem_bytes // 2, dtype=np.int16)
        self.llm = np.zeros((NUM_LANES, self.cfg.llm_halfwords_per_lane),
                            dtype=np.int16)
        self.ext = np.zeros(0, dtype=np.uint8)   # grown on demand
        self.dma = DmaEngine(self, timing)
        self.csrs: dict[int, int] = {}
        self.cycles = 0
        self.instret = 0
        self.region = 0
        self.region_cycles: dict[int, int] = {}

    # -- memories -------------------------------------------------------

    def ensure_external(self, nbytes: int) -> None:
        if len(self.ext) < nbytes:
            grown = np.zeros(nbytes, dtype=np.uint8)
            grown[: len(self.ext)] = self.ext
            self.ext = grown

    def load_image(self, img: ProgramImage) -> None:
        for s in img.sections:
            if s.space == SPACE_IMEM:
                self.imem[s.base:s.base + len(s.data)] = s.data
            elif s.space == SPACE_DMEM:
                self.dmem[s.base:s.base + len(s.data)] = s.data
            elif s.space == SPACE_VMEM:
                half = np.frombuffer(bytes(s.data), dtype=np.int16)
                self.vmem[s.base // 2:s.base // 2 + len(half)] = half
            elif s.space == SPACE_LLM:
                half = np.frombuffer(bytes(s.data), dtype=np.int16)
                lo = s.base // 2
                if s.lane == LANE_ALL:
                    self.llm[:, lo:lo + len(half)] = half
                else:
                    self.llm[s.lane, lo:lo + len(half)] = half
            else:
                raise ValueError(f"unknown image space {s.space}")

    def dump_image(self) -> ProgramImage:
        img = ProgramImage()
        img.sections.append(Section(SPACE_IMEM, LANE_ALL, 0, bytearray(self.imem)))
        img.sections.append(Section(SPACE_DMEM, LANE_ALL, 0, bytearray(self.dmem)))
        img.sections.append(Section(SPACE_VMEM, LANE_ALL, 0,
                                    bytearray(self.vmem.tobytes())))
        for lane in range(NUM_LANES):
            img.sections.append(Section(SPACE_LLM, lane, 0,
                                        bytearray(self.llm[lane].tobytes())))
        return img

    # -- CSRs -----------------------------------------------------------

    def csr_read(self, addr: int) -> int:
        if addr == isa.CSR_MCYCLE:
            return self.cycles & 0xFFFFFFFF
        if addr == isa.CSR_MINSTRET:
            return self.instret & 0xFFFFFFFF
        if addr == isa.CSR_DMA_STATUS:
            return 1 if self.dma.busy(self.cycles) else 0
        if addr == isa.CSR_DMA_EXT_ADDR:
            return self.dma.ext_addr
        if addr == isa.CSR_DMA_LOCAL_ADDR:
            return self.dma.local_addr
        if addr == isa.CSR_DMA_BYTES:
            return self.dma.nbytes
        if addr == isa.CSR_PERF_REGION:
            return self.region
        return self.csrs.get(addr, 0)

    def csr_write(self, addr: int, value: int) -> None:
        value &= 0xFFFFFFFF
        if addr == isa.CSR_DMA_EXT_ADDR:
            self.dma.ext_addr = value
        elif addr == isa.CSR_DMA_LOCAL_ADDR:
            self.dma.local_addr = value
        elif addr == isa.CSR_DMA_BYTES:
            self.dma.nbytes = value
        elif addr == isa.CSR_DMA_CTRL:
            if value & 1:
                self.dma.start((value >> 1) & 1, self.cycles)
        elif addr == isa.CSR_PERF_REGION:
            self.region = value
        else:
            self.csrs[addr] = value

    def perf_report(self) -> PerfReport:
        return PerfReport(self.cycles, self.instret, dict(self.region_cycles))


def _s32(v: int) -> int:
    v &= 0xFFFFFFFF
    return v - (1 << 32) if v & 0x80000000 else v


def _mask_to_bits(cond: np.ndarray) -> int:
    return _s32(int(cond.astype(np.uint64) @ _BIT_WEIGHTS))


def _bits_to_mask(value: int) -> np.ndarray:
    return ((value >> _LANE_IDX) & 1).astype(bool)


class _ExecMixin:
    """Shared functional semantics for both engines (memory + lane helpers)."""

    m: Machine

    def _trap(self, reason: str) -> SimTrap:
        m = self.m
        word = struct.unpack_from("<I", m.imem, m.pc)[0] if m.pc + 4 <= len(m.imem) else 0
        return SimTrap(reason, m.pc, word)

    def _dmem_load(self, addr: int, size: int, signed: bool) -> int:
        m = self.m
        if addr < 0 or addr + size > len(m.dmem):
            raise self._trap(f"scalar load outside data memory: 0x{addr:x}")
        if addr % size:
            raise self._trap(f"misaligned scalar load: 0x{addr:x}")
        raw = int.from_bytes(m.dmem[addr:addr + size], "little")
        if signed and raw >> (8 * size - 1):
            raw -= 1 << (8 * size)
        return raw

    def _dmem_store(self, addr: int, size: int, value: int) -> None:
        m = self.m
        if addr < 0 or addr + size > len(m.dmem):
            raise self._trap(f"scalar store outside data memory: 0x{addr:x}")
        if addr % size:
            raise self._trap(f"misaligned scalar store: 0x{addr:x}")
        m.dmem[addr:addr + size] = (value & ((1 << (8 * size)) - 1)).to_bytes(size, "little")

    def _vmem_slice(self, base: int, imm: int, is_write: bool) -> slice:
        m = self.m
        ea = (base + imm) & 0xFFFFFFFF
        if ea % 64:
            raise self._trap(f"vector memory access not 64-byte aligned: 0x{ea:x}")
        if ea + 64 > m.cfg.vmem_bytes:
            raise self._trap(f"vector memory access out of range: 0x{ea:x}")
        m.dma.check_vmem_access(ea, 64, m.cycles, is_write)
        hw = ea >> 1
        return slice(hw, hw + NUM_LANES)

    def _llm_addrs(self, addr_vec: np.ndarray, imm: int) -> np.ndarray:
        m = self.m
        addrs = (addr_vec.astype(np.int64) & 0xFFFF) + imm
        if addrs.min() < 0 or addrs.max() >= m.cfg.llm_halfwords_per_lane:
            raise self._trap("lane-local address out of range")
        return addrs

    def _seed_load(self, which: int, base: int, imm: int) -> None:
        m = self.m
        vals = np.asarray(m.vmem[self._vmem_slice(base, imm, False)]).astype(np.int64) & 0xFFFF
        bad = m.rng.set_seed(which, vals)
        if len(bad):
            raise self._trap(f"RNG seed load leaves lanes {list(bad)} all-zero")

    def _rand15(self) -> np.ndarray:
        return (self.m.rng.step() >> 1).astype(np.int64)


def _clz32(v: int) -> int:
    v &= 0xFFFFFFFF
    return 32 - v.bit_length()


class PipelinedCore(_ExecMixin):
    """Cycle-approximate engine with decoded-closure caching."""

    def __init__(self, machine: Machine, trace=None):
        self.m = machine
        self.halted = False
        self.exit_code = 0
        nwords = len(machine.imem) // 4
        self._funcs: list = [None] * nwords
        self._extra: list = [0] * nwords        # static extra cycles (unused now)
        self._load_dest: list = [None] * nwords
        self._srcs: list = [()] * nwords
        self.trace = trace

    # -- closure builders ----------------------------------------------

    def _build(self, idx: int):
        m = self.m
        word = struct.unpack_from("<I", m.imem, idx * 4)[0]
        try:
            i = isa.decode(word)
        except isa.IllegalInstruction:
            raise SimTrap("illegal instruction", idx * 4, word)
        fn, load_dest, srcs = self._compile(i, idx * 4)
        self._funcs[idx] = fn
        self._load_dest[idx] = load_dest
        self._srcs[idx] = frozenset(srcs)
        return fn

    def _compile(self, i: isa.Instr, pc: int):
        """Return (closure, load_dest_key, hazard_source_keys)."""
        m = self.m
        x, v = m.x, m.v
        mn = i.mnemonic
        rd, rs1, rs2, imm = i.rd, i.rs1, i.rs2, i.imm
        npc = pc + 4
        penalty = m.timing.branch_taken_penalty
        srcs = []
        if mn in isa.VEC_RS1:
            srcs.append(("v", rs1))
        if mn in isa.VEC_RS2:
            srcs.append(("v", rs2))
        if mn in ("vload.v", "vload.r0", "vload.r1", "vstore.v", "vfill",
                  "vsel", "vandadd", "jalr",
                  "lb", "lh", "lw", "lbu", "lhu", "sb", "sh", "sw") or \
                (not i.is_vector and mn not in ("lui", "auipc", "jal", "ecall",
                                                "ebreak", "fence", "csrrwi",
                                                "csrrsi", "csrrci")):
            if rs1:
                srcs.append(("x", rs1))
        if not i.is_vector and mn in ("add", "sub", "sll", "slt", "sltu", "xor",
                                      "srl", "sra", "or", "and", "mul", "mulh",
                                      "mulhsu", "mulhu", "div", "divu", "rem",
                                      "remu", "sb", "sh", "sw", "beq", "bne",
                                      "blt", "bge", "bltu", "bgeu"):
            if rs2:
                srcs.append(("x", rs2))
        load_dest = None
        if mn in isa.VECTOR_LOADS:
            load_dest = ("v", rd)
        elif mn in isa.SCALAR_LOADS and rd:
            load_dest = ("x", rd)

        def advance():
            m.pc = npc

        # Vector ALU ops.
        if mn in ("vadd", "vsub"):
            sign = 1 if mn == "vadd" else -1
            if i.sat:
                def fn():
                    r = v[rs1].astype(np.int32) + sign * v[rs2]
                    np.clip(r, -32768, 32767, out=r)
                    v[rd] = r
                    m.pc = npc
            else:
                def fn():
                    v[rd] = v[rs1] + sign * v[rs2]   # int16 wraparound
                    m.pc = npc
            return fn, load_dest, srcs
        if mn == "vand":
            def fn():
                v[rd] = v[rs1] & v[rs2]
                m.pc = npc
            return fn, load_dest, srcs
        if mn == "vsl":
            def fn():
                sh = v[rs2].astype(np.int32) & 0xF
                v[rd] = ((v[rs1].astype(np.int32) << sh) & 0xFFFF).astype(np.uint16).view(np.int16)
                m.pc = npc
            return fn, load_dest, srcs
        if mn == "vsr":
            def fn():
                sh = v[rs2].astype(np.int32) & 0xF
                v[rd] = (v[rs1].astype(np.int32) >> sh).astype(np.int16)
                m.pc = npc
            return fn, load_dest, srcs
        if mn == "vmul":
            shift, mode = i.shift, i.mode
            from .fxp import RoundMode
            if mode == RoundMode.STOCHASTIC:
                mask = (1 << shift) - 1
                def fn():
                    p = v[rs1].astype(np.int64) * v[rs2] + (self._rand15() & mask)
                    v[rd] = ((p >> shift) & 0xFFFF).astype(np.uint16).view(np.int16)
                    m.pc = npc
            else:
                addend = (1 << (shift - 1)) if (mode == RoundMode.TO_NEAREST and shift > 0) else 0
                def fn():
                    p = v[rs1].astype(np.int64) * v[rs2] + addend
                    v[rd] = ((p >> shift) & 0xFFFF).astype(np.uint16).view(np.int16)
                    m.pc = npc
            return fn, load_dest, srcs
        if mn in ("vteq", "vtne", "vtlt", "vtge"):
            op = {"vteq": np.equal, "vtne": np.not_equal,
                  "vtlt": np.less, "vtge": np.greater_equal}[mn]
            if rd:
                def fn():
                    x[rd] = _mask_to_bits(op(v[rs1], v[rs2]))
                    m.pc = npc
            else:
                fn = advance
            return fn, load_dest, srcs
        if mn == "vsel":
            def fn():
                sel = _bits_to_mask(x[rs1])
                np.copyto(v[rd], v[rs2], where=sel)
                m.pc = npc
            return fn, load_dest, srcs
        if mn == "vsli":
            shift = i.shift
            def fn():
                v[rd] = ((v[rs1].astype(np.int32) << shift) & 0xFFFF).astype(np.uint16).view(np.int16)
                m.pc = npc
            return fn, load_dest, srcs
        if mn == "vsri":
            shift, mode = i.shift, i.mode
            from .fxp import RoundMode
            if mode == RoundMode.STOCHASTIC:
                mask = (1 << shift) - 1
                def fn():
                    s = v[rs1].astype(np.int64) + (self._rand15() & mask)
                    v[rd] = ((s >> shift) & 0xFFFF).astype(np.uint16).view(np.int16)
                    m.pc = npc
            else:
                addend = (1 << (shift - 1)) if (mode == RoundMode.TO_NEAREST and shift > 0) else 0
                def fn():
                    s = v[rs1].astype(np.int64) + addend
                    v[rd] = ((s >> shift) & 0xFFFF).astype(np.uint16).view(np.int16)
                    m.pc = npc
            return fn, load_dest, srcs
        if mn == "vrng":
            def fn():
                v[rd] = (m.rng.step() >> 1).astype(np.int16)
                m.pc = npc
            return fn, load_dest, srcs
        if mn == "vandadd":
            mask = (1 << i.shift) - 1
            def fn():
                r = ((v[rs1].astype(np.int64) & mask) + (x[rs2] & 0xFFFF)) & 0xFFFF
                v[rd] = r.astype(np.uint16).view(np.int16)
                m.pc = npc
            return fn, load_dest, srcs
        if mn == "vlui":
            fill = np.full(NUM_LANES, imm, dtype=np.uint16).view(np.int16)
            def fn():
                v[rd] = fill
                m.pc = npc
            return fn, load_dest, srcs
        if mn == "vfill":
            def fn():
                v[rd] = np.int16(((x[rs1] & 0xFFFF) ^ 0x8000) - 0x8000)
                m.pc = npc
            return fn, load_dest, srcs
        if mn == "vextract":
            lane = imm
            if rd:
                def fn():
                    x[rd] = int(v[rs1][lane])
                    m.pc = npc
            else:
                fn = advance
            return fn, load_dest, srcs
        if mn == "vload.v":
            vmem = m.vmem
            def fn():
                v[rd] = vmem[self._vmem_slice(x[rs1], imm, False)]
                m.pc = npc
            return fn, load_dest, srcs
        if mn == "vstore.v":
            vmem = m.vmem
            def fn():
                vmem[self._vmem_slice(x[rs1], imm, True)] = v[rs2]
                m.pc = npc
            return fn, load_dest, srcs
        if mn == "vload.l":
            llm = m.llm
            def fn():
                addrs = self._llm_addrs(v[rs1], imm)
                v[rd] = llm[_LANE_IDX, addrs]
                m.pc = npc
            return fn, load_dest, srcs
        if mn == "vstore.l":
            llm = m.llm
            def fn():
                addrs = self._llm_addrs(v[rs1], imm)
                llm[_LANE_IDX, addrs] = v[rs2]
                m.pc = npc
            return fn, load_dest, srcs
        if mn in ("vload.r0", "vload.r1"):
            which = 0 if mn == "vload.r0" else 1
            def fn():
                self._seed_load(which, x[rs1], imm)
                m.pc = npc
            return fn, load_dest, srcs

        # Scalar instructions.
        if mn == "lui":
            value = _s32(imm << 12)
            def fn():
                if rd:
                    x[rd] = value
                m.pc = npc
            return fn, load_dest, srcs
        if mn == "auipc":
            value = _s32(pc + (imm << 12))
            def fn():
                if rd:
                    x[rd] = value
                m.pc = npc
            return fn, load_dest, srcs
        if mn == "jal":
            target = pc + imm
            def fn():
                if rd:
                    x[rd] = npc
                m.pc = target
                return penalty
            return fn, load_dest, srcs
        if mn == "jalr":
            def fn():
                t = (x[rs1] + imm) & 0xFFFFFFFE
                if rd:
                    x[rd] = npc
                m.pc = t
                return penalty
            return fn, load_dest, srcs
        if mn in ("beq", "bne", "blt", "bge", "bltu", "bgeu"):
            target = pc + imm
            def cond():
                a, b = x[rs1], x[rs2]
                if mn == "beq":
                    return a == b
                if mn == "bne":
                    return a != b
                if mn == "blt":
                    return a < b
                if mn == "bge":
                    return a >= b
                if mn == "bltu":
                    return (a & 0xFFFFFFFF) < (b & 0xFFFFFFFF)
                return (a & 0xFFFFFFFF) >= (b & 0xFFFFFFFF)
            def fn():
                if cond():
                    m.pc = target
                    return penalty
                m.pc = npc
            return fn, load_dest, srcs
        if mn in ("lb", "lh", "lw", "lbu", "lhu"):
            size = {"lb": 1, "lh": 2, "lw": 4, "lbu": 1, "lhu": 2}[mn]
            signed = not mn.endswith("u")
            def fn():
                val = self._dmem_load((x[rs1] + imm) & 0xFFFFFFFF, size, signed)
                if rd:
                    x[rd] = val
                m.pc = npc
            return fn, load_dest, srcs
        if mn in ("sb", "sh", "sw"):
            size = {"sb": 1, "sh": 2, "sw": 4}[mn]
            def fn():
                self._dmem_store((x[rs1] + imm) & 0xFFFFFFFF, size, x[rs2])
                m.pc = npc
            return fn, load_dest, srcs
        if mn in ("addi", "slti", "sltiu", "xori", "ori", "andi",
                  "slli", "srli", "srai", "clz"):
            def fn():
                a = x[rs1]
                if mn == "addi":
                    r = _s32(a + imm)
                elif mn == "slti":
                    r = 1 if a < imm else 0
                elif mn == "sltiu":
                    r = 1 if (a & 0xFFFFFFFF) < (imm & 0xFFFFFFFF) else 0
                elif mn == "xori":
                    r = _s32(a ^ imm)
                elif mn == "ori":
                    r = _s32(a | imm)
                elif mn == "andi":
                    r = _s32(a & imm)
                elif mn == "slli":
                    r = _s32(a << imm)
                elif mn == "srli":
                    r = _s32((a & 0xFFFFFFFF) >> imm)
                elif mn == "srai":
                    r = a >> imm
                else:
                    r = _clz32(a)
                if rd:
                    x[rd] = r
                m.pc = npc
            return fn, load_dest, srcs
        if mn in ("add", "sub", "sll", "slt", "sltu", "xor", "srl", "sra",
                  "or", "and", "mul", "mulh", "mulhsu", "mulhu",
                  "div", "divu", "rem", "remu"):
            def fn():
                a, b = x[rs1], x[rs2]
                au, bu = a & 0xFFFFFFFF, b & 0xFFFFFFFF
                if mn == "add":
                    r = _s32(a + b)
                elif mn == "sub":
                    r = _s32(a - b)
                elif mn == "sll":
                    r = _s32(a << (b & 31))
                elif mn == "slt":
                    r = 1 if a < b else 0
                elif mn == "sltu":
                    r = 1 if au < bu else 0
                elif mn == "xor":
                    r = _s32(a ^ b)
                elif mn == "srl":
                    r = _s32(au >> (b & 31))
                elif mn == "sra":
                    r = a >> (b & 31)
                elif mn == "or":
                    r = _s32(a | b)
                elif mn == "and":
                    r = _s32(a & b)
                elif mn == "mul":
                    r = _s32(a * b)
                elif mn == "mulh":
                    r = _s32((a * b) >> 32)
                elif mn == "mulhsu":
                    r = _s32((a * bu) >> 32)
                elif mn == "mulhu":
                    r = _s32((au * bu) >> 32)
                elif mn == "div":
                    if b == 0:
                        r = -1
                    elif a == -(1 << 31) and b == -1:
                        r = a
                    else:
                        q = abs(a) // abs(b)
                        r = _s32(-q if (a < 0) != (b < 0) else q)
                elif mn == "divu":
                    r = _s32(0xFFFFFFFF if bu == 0 else au // bu)
                elif mn == "rem":
                    if b == 0:
                        r = a
                    elif a == -(1 << 31) and b == -1:
                        r = 0
                    else:
                        q = abs(a) // abs(b)
                        q = -q if (a < 0) != (b < 0) else q
                        r = _s32(a - q * b)
                else:
                    r = _s32(au if bu == 0 else au % bu)
                if rd:
                    x[rd] = r
                m.pc = npc
            return fn, load_dest, srcs
        if mn == "ecall":
            def fn():
                self.halted = True
                self.exit_code = x[10] & 0xFFFFFFFF
                m.pc = npc
            return fn, load_dest, srcs
        if mn == "ebreak":
            def fn():
                raise SimTrap("breakpoint", pc, 0x00100073)
            return fn, load_dest, srcs
        if mn == "fence":
            return advance, load_dest, srcs
        if mn in ("csrrw", "csrrs", "csrrc", "csrrwi", "csrrsi", "csrrci"):
            csr = i.csr
            uimm = rs1
            def fn():
                old = m.csr_read(csr)
                arg = uimm if mn.endswith("i") else (x[rs1] & 0xFFFFFFFF)
                if mn in ("csrrw", "csrrwi"):
                    m.csr_write(csr, arg)
                elif mn in ("csrrs", "csrrsi"):
                    if arg:
                        m.csr_write(csr, old | arg)
                else:
                    if arg:
                        m.csr_write(csr, old & ~arg)
                if rd:
                    x[rd] = _s32(old)
                m.pc = npc
            return fn, load_dest, srcs
        raise SimTrap(f"unimplemented mnemonic {mn}", pc)

    # -- run loop -------------------------------------------------------

    def run(self, max_cycles: int = 10_000_000) -> ExitInfo:
        m = self.m
        self.halted = False
        funcs = self._funcs
        load_dest = self._load_dest
        srcs = self._srcs
        stall = m.timing.load_use_stall
        m.cycles += m.timing.pipeline_fill
        m.region_cycles[m.region] = m.region_cycles.get(m.region, 0) + m.timing.pipeline_fill
        prev_load = None
        region_cycles = m.region_cycles
        budget = m.cycles + max_cycles
        trace = self.trace
        while True:
            pc = m.pc
            idx = pc >> 2
            if pc % 4 or idx >= len(funcs):
                raise SimTrap("pc outside instruction memory", pc)
            fn = funcs[idx]
            if fn is None:
                fn = self._build(idx)
            if trace is not None:
                word = struct.unpack_from("<I", m.imem, pc)[0]
                trace.write(f"{m.cycles} {pc:08x} {disassemble(word)}\n")
            try:
                extra = fn()
            except SimTrap:
                raise
            except Exception as e:   # make internal errors diagnosable
                word = struct.unpack_from("<I", m.imem, pc)[0]
                raise SimTrap(f"internal: {e}", pc, word)
            cost = 1 + (extra or 0)
            if prev_load is not None and prev_load in srcs[idx]:
                cost += stall
            m.cycles += cost
            region = m.region
            region_cycles[region] = region_cycles.get(region, 0) + cost
            m.instret += 1
            prev_load = load_dest[idx]
            if self.halted:
                m.dma.flush()
                return ExitInfo(self.exit_code, m.cycles, m.instret,
                                dict(region_cycles))
            if m.cycles >= budget:
                return ExitInfo(0, m.cycles, m.instret, dict(region_cycles),
                                timed_out=True)


class RefCore(_ExecMixin):
    """Naive big-step interpreter: decode and execute one word at a time.

    Used as the reference side of the pipeline differential test; charges
    one cycle per retired instruction.
    """

    def __init__(self, machine: Machine):
        self.m = machine
        self.halted = False
        self.exit_code = 0

    def step(self) -> None:
        from .fxp import RoundMode
        m = self.m
        pc = m.pc
        if pc % 4 or pc + 4 > len(m.imem):
            raise SimTrap("pc outside instruction memory", pc)
        word = struct.unpack_from("<I", m.imem, pc)[0]
        try:
            i = isa.decode(word)
        except isa.IllegalInstruction:
            raise SimTrap("illegal instruction", pc, word)
        mn = i.mnemonic
        x, v = m.x, m.v
        npc = pc + 4
        wide1 = v[i.rs1].astype(np.int64)
        if mn == "vadd":
            r = wide1 + v[i.rs2]
            v[i.rd] = np.clip(r, -32768, 32767) if i.sat else (r & 0xFFFF).astype(np.uint16).view(np.int16)
        elif mn == "vsub":
            r = wide1 - v[i.rs2]
            v[i.rd] = np.clip(r, -32768, 32767) if i.sat else (r & 0xFFFF).astype(np.uint16).view(np.int16)
        elif mn == "vand":
            v[i.rd] = v[i.rs1] & v[i.rs2]
        elif mn == "vsl":
            v[i.rd] = ((wide1 << (v[i.rs2].astype(np.int64) & 0xF)) & 0xFFFF).astype(np.uint16).view(np.int16)
        elif mn == "vsr":
            v[i.rd] = (wide1 >> (v[i.rs2].astype(np.int64) & 0xF)).astype(np.int16)
        elif mn == "vmul":
            p = wide1 * v[i.rs2]
            if i.mode == RoundMode.TO_NEAREST and i.shift > 0:
                p = p + (1 << (i.shift - 1))
            elif i.mode == RoundMode.STOCHASTIC:
                p = p + (self._rand15() & ((1 << i.shift) - 1))
            v[i.rd] = ((p >> i.shift) & 0xFFFF).astype(np.uint16).view(np.int16)
        elif mn in ("vteq", "vtne", "vtlt", "vtge"):
            op = {"vteq": np.equal, "vtne": np.not_equal,
                  "vtlt": np.less, "vtge": np.greater_equal}[mn]
            if i.rd:
                x[i.rd] = _mask_to_bits(op(v[i.rs1], v[i.rs2]))
        elif mn == "vsel":
            np.copyto(v[i.rd], v[i.rs2], where=_bits_to_mask(x[i.rs1]))
        elif mn == "vsli":
            v[i.rd] = ((wide1 << i.shift) & 0xFFFF).astype(np.uint16).view(np.int16)
        elif mn == "vsri":
            s = wide1
            if i.mode == RoundMode.TO_NEAREST and i.shift > 0:
                s = s + (1 << (i.shift - 1))
            elif i.mode == RoundMode.STOCHASTIC:
                s = s + (self._rand15() & ((1 << i.shift) - 1))
            v[i.rd] = ((s >> i.shift) & 0xFFFF).astype(np.uint16).view(np.int16)
        elif mn == "vrng":
            v[i.rd] = (m.rng.step() >> 1).astype(np.int16)
        elif mn == "vandadd":
            r = ((wide1 & ((1 << i.shift) - 1)) + (x[i.rs2] & 0xFFFF)) & 0xFFFF
            v[i.rd] = r.astype(np.uint16).view(np.int16)
        elif mn == "vlui":
            v[i.rd] = np.full(NUM_LANES, i.imm, dtype=np.uint16).view(np.int16)
        elif mn == "vfill":
            v[i.rd] = np.int16(((x[i.rs1] & 0xFFFF) ^ 0x8000) - 0x8000)
        elif mn == "vextract":
            if i.rd:
                x[i.rd] = int(v[i.rs1][i.imm])
        elif mn == "vload.v":
            v[i.rd] = m.vmem[self._vmem_slice(x[i.rs1], i.imm, False)]
        elif mn == "vstore.v":
            m.vmem[self._vmem_slice(x[i.rs1], i.imm, True)] = v[i.rs2]
        elif mn == "vload.l":
            v[i.rd] = m.llm[_LANE_IDX, self._llm_addrs(v[i.rs1], i.imm)]
        elif mn == "vstore.l":
            m.llm[_LANE_IDX, self._llm_addrs(v[i.rs1], i.imm)] = v[i.rs2]
        elif mn == "vload.r0":
            self._seed_load(0, x[i.rs1], i.imm)
        elif mn == "vload.r1":
            self._seed_load(1, x[i.rs1], i.imm)
        else:
            npc = self._scalar(i, pc, word)
        m.pc = npc
        m.cycles += 1
        m.instret += 1

    def _scalar(self, i: isa.Instr, pc: int, word: int) -> int:
        m = self.m
        x = m.x
        mn = i.mnemonic
        rd, rs1, rs2, imm = i.rd, i.rs1, i.rs2, i.imm
        npc = pc + 4
        a = x[rs1]
        b = x[rs2]
        au, bu = a & 0xFFFFFFFF, b & 0xFFFFFFFF
        r = None
        if mn == "lui":
            r = _s32(imm << 12)
        elif mn == "auipc":
            r = _s32(pc + (imm << 12))
        elif mn == "jal":
            r = npc
            npc = pc + imm
        elif mn == "jalr":
            r = npc
            npc = (a + imm) & 0xFFFFFFFE
        elif mn in ("beq", "bne", "blt", "bge", "bltu", "bgeu"):
            taken = {"beq": a == b, "bne": a != b, "blt": a < b,
                     "bge": a >= b, "bltu": au < bu, "bgeu": au >= bu}[mn]
            if taken:
                npc = pc + imm
        elif mn in ("lb", "lh", "lw", "lbu", "lhu"):
            size = {"lb": 1, "lh": 2, "lw": 4, "lbu": 1, "lhu": 2}[mn]
            r = self._dmem_load((a + imm) & 0xFFFFFFFF, size, not mn.endswith("u"))
        elif mn in ("sb", "sh", "sw"):
            size = {"sb": 1, "sh": 2, "sw": 4}[mn]
            self._dmem_store((a + imm) & 0xFFFFFFFF, size, b)
        elif mn == "addi":
            r = _s32(a + imm)
        elif mn == "slti":
            r = 1 if a < imm else 0
        elif mn == "sltiu":
            r = 1 if au < (imm & 0xFFFFFFFF) else 0
        elif mn == "xori":
            r = _s32(a ^ imm)
        elif mn == "ori":
            r = _s32(a | imm)
        elif mn == "andi":
            r = _s32(a & imm)
        elif mn == "slli":
            r = _s32(a << imm)
        elif mn == "srli":
            r = _s32(au >> imm)
        elif mn == "srai":
            r = a >> imm
        elif mn == "clz":
            r = _clz32(a)
        elif mn == "add":
            r = _s32(a + b)
        elif mn == "sub":
            r = _s32(a - b)
        elif mn == "sll":
            r = _s32(a << (b & 31))
        elif mn == "slt":
            r = 1 if a < b else 0
        elif mn == "sltu":
            r = 1 if au < bu else 0
        elif mn == "xor":
            r = _s32(a ^ b)
        elif mn == "srl":
            r = _s32(au >> (b & 31))
        elif mn == "sra":
            r = a >> (b & 31)
        elif mn == "or":
            r = _s32(a | b)
        elif mn == "and":
            r = _s32(a & b)
        elif mn == "mul":
            r = _s32(a * b)
        elif mn == "mulh":
            r = _s32((a * b) >> 32)
        elif mn == "mulhsu":
            r = _s32((a * bu) >> 32)
        elif mn == "mulhu":
            r = _s32((au * bu) >> 32)
        elif mn == "div":
            if b == 0:
                r = -1
            elif a == -(1 << 31) and b == -1:
                r = a
            else:
                q = abs(a) // abs(b)
                r = _s32(-q if (a < 0) != (b < 0) else q)
        elif mn == "divu":
            r = _s32(0xFFFFFFFF if bu == 0 else au // bu)
        elif mn == "rem":
            if b == 0:
                r = a
            elif a == -(1 << 31) and b == -1:
                r = 0
            else:
                q = abs(a) // abs(b)
                q = -q if (a < 0) != (b < 0) else q
                r = _s32(a - q * b)
        elif mn == "remu":
            r = _s32(au if bu == 0 else au % bu)
        elif mn == "ecall":
            self.halted = True
            self.exit_code = x[10] & 0xFFFFFFFF
        elif mn == "ebreak":
            raise SimTrap("breakpoint", pc, word)
        elif mn == "fence":
            pass
        elif mn in ("csrrw", "csrrs", "csrrc", "csrrwi", "csrrsi", "csrrci"):
            old = m.csr_read(i.csr)
            arg = rs1 if mn.endswith("i") else au
            if mn in ("csrrw", "csrrwi"):
                m.csr_write(i.csr, arg)
            elif mn in ("csrrs", "csrrsi"):
                if arg:
                    m.csr_write(i.csr, old | arg)
            else:
                if arg:
                    m.csr_write(i.csr, old & ~arg)
            r = _s32(old)
        else:
            raise SimTrap(f"unimplemented mnemonic {mn}", pc, word)
        if r is not None and rd:
            x[rd] = r
        return npc

    def run(self, max_instructions: int = 10_000_000) -> ExitInfo:
        m = self.m
        self.halted = False
        for _ in range(max_instructions):
            self.step()
            if self.halted:
                m.dma.flush()
                return ExitInfo(self.exit_code, m.cycles, m.instret,
                                dict(m.region_cycles))
        return ExitInfo(0, m.cycles, m.instret, dict(m.region_cycles),
                        timed_out=True)


def run_image(img: ProgramImage, cfg: MemConfig | None = None,
              max_cycles: int = 10_000_000, engine: str = "pipelined",
              trace=None) -> tuple[ExitInfo, Machine]:
    """Load a program image into a fresh machine and run it to completion."""
    m = Machine(cfg)
    m.load_image(img)
    if engine == "pipelined":
        info = PipelinedCore(m, trace=trace).run(max_cycles)
    elif engine == "reference":
        info = RefCore(m).run(max_cycles)
    else:
        raise ValueError(f"unknown engine {engine!r}")
    return info, m
