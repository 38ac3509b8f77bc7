"""Network/model layer: populations, event containers, connectivity
encoders, memory allocation, program generation and the per-timestep
simulation loop.

A model is a graph of populations (each with a neuron-update kernel in
the DSL) and connections (dense, compressed or delayed row matrices).
``elaborate`` lowers the whole graph to one assembled program that runs a
single timestep: an update phase writing spike bitfields, then a
propagation phase scanning those bitfields and dispatching row routines.
``run`` drives the program once per timestep from the host, feeding input
spikes and collecting rasters and recorded variables.

Timestep convention: input and population spikes at step t are propagated
during step t and arrive in the target's I (or its delay slot) for the
update at step t+1+delay.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import dslc, isa, kernels
from .asm import Assembler, ProgramImage
from .fxp import QFormat, quantize
from .sim import Machine, MemConfig, PipelinedCore, SimTrap

NUM_LANES = 32
S7_8 = QFormat(8, True)
S0_15 = QFormat(15, True)


class ModelError(Exception):
    pass


def _ceil32(n: int) -> int:
    return -(-n // NUM_LANES) * NUM_LANES


def _next_pow2(n: int) -> int:
    return 1 << max(0, (n - 1).bit_length())


# ---------------------------------------------------------------------------
# Model graph
# ---------------------------------------------------------------------------

@dataclass
class Variable:
    name: str
    shape: int
    fmt: QFormat = S7_8
    init: object = 0            # scalar, array, or callable(rng, shape)
    placement: str | None = None  # decided during elaboration if None


@dataclass
class EventContainer:
    name: str
    shape: int

    @property
    def n_words(self) -> int:
        return _ceil32(self.shape) // NUM_LANES


@dataclass
class Population:
    name: str
    shape: int
    kernel: dslc.KernelSource
    variables: dict[str, Variable]
    spike_event: str = "Spike"

    @property
    def padded(self) -> int:
        return _ceil32(self.shape)

    @property
    def n_words(self) -> int:
        return self.padded // NUM_LANES


def lif_population(name: str, shape: int, tau: float, v_thresh: float,
                   bias: float = 0.0, v_init=0) -> Population:
    """The standard LIF neuron: V = alpha*V + I (+ bias), threshold-
    subtract reset, I cleared every step."""
    drive = " + Bias" if bias else ""
    code = (f"V = ((Alpha * V) + I){drive};\n"
            "I = 0;\n"
            "if (V >= VThresh) {\n"
            "    Spike();\n"
            "    V = V - VThresh;\n"
            "}\n")
    params = {"Alpha": (float(np.exp(-1.0 / tau)), S0_15),
              "VThresh": (v_thresh, S7_8)}
    if bias:
        params["Bias"] = (bias, S7_8)
    src = dslc.KernelSource(code=code, params=params,
                            vars={"V": S7_8, "I": S7_8}, events=("Spike",))
    return Population(name, shape, src,
                      {"V": Variable("V", shape, S7_8, v_init),
                       "I": Variable("I", shape, S7_8, 0)})


@dataclass
class Connection:
    src: str                    # population or input container name
    dst: str
    encoding: str               # "dense" | "compressed" | "delayed"
    weights: np.ndarray         # float (quantized here) or int16 raw
    fmt: QFormat = S7_8
    target: str = "I"
    delays: np.ndarray | None = None
    n_delay: int = 1
    placement: str = "auto"     # "auto" | "vmem" | "external"
    raw: bool = False           # weights already raw int16


class Model:
    def __init__(self, name: str = "model"):
        self.name = name
        self.populations: dict[str, Population] = {}
        self.inputs: dict[str, EventContainer] = {}
        self.connections: list[Connection] = []

    def add_population(self, pop: Population) -> Population:
        if pop.name in self.populations or pop.name in self.inputs:
            raise ModelError(f"duplicate name {pop.name!r}")
        self.populations[pop.name] = pop
        return pop

    def add_input(self, name: str, shape: int) -> EventContainer:
        if name in self.populations or name in self.inputs:
            raise ModelError(f"duplicate name {name!r}")
        c = EventContainer(name, shape)
        self.inputs[name] = c
        return c

    def connect(self, conn: Connection) -> Connection:
        if conn.src not in self.populations and conn.src not in self.inputs:
            raise ModelError(f"unknown source {conn.src!r}")
        if conn.dst not in self.populations:
            raise ModelError(f"unknown destination {conn.dst!r}")
        n_pre = (self.populations.get(conn.src) or self.inputs[conn.src]).shape
        n_post = self.populations[conn.dst].shape
        if conn.weights.shape != (n_pre, n_post):
            raise ModelError(
                f"weight shape {conn.weights.shape} does not match "
                f"({n_pre}, {n_post}) for {conn.src}->{conn.dst}")
        self.connections.append(conn)
        return conn


# ---------------------------------------------------------------------------
# Row matrices
# ---------------------------------------------------------------------------

@dataclass
class RowMatrix:
    encoding: str
    n_pre: int
    n_post: int                 # padded target count (multiple of 32)
    row_vectors: int            # uniform stride, in 64-byte vectors
    payload: np.ndarray         # int16 (n_pre, row_vectors*32)
    sops: np.ndarray            # per-row actual (non-padding) connections
    n_target: int = 0           # compressed: power-of-two local index space
    n_delay: int = 1
    padding_fraction: float = 0.0

    @property
    def stride_bytes(self) -> int:
        return self.row_vectors * 64


def quantize_weights(w: np.ndarray, fmt: QFormat, raw: bool) -> np.ndarray:
    if raw:
        return np.asarray(w, dtype=np.int64)
    scaled = np.floor(np.asarray(w, dtype=np.float64) * fmt.scale + 0.5)
    return np.clip(scaled, -32768, 32767).astype(np.int64)


def build_dense_rows(weights: np.ndarray, fmt: QFormat = S7_8,
                     raw: bool = False) -> RowMatrix:
    q = quantize_weights(weights, fmt, raw)
    n_pre, n_post = q.shape
    padded = _ceil32(n_post)
    payload = np.zeros((n_pre, padded), dtype=np.int16)
    payload[:, :n_post] = q.astype(np.int16)
    sops = np.full(n_pre, n_post, dtype=np.int64)
    return RowMatrix("dense", n_pre, padded, padded // NUM_LANES, payload,
                     sops, padding_fraction=(padded - n_post) / padded)


def build_compressed_rows(weights: np.ndarray, fmt: QFormat = S7_8,
                          raw: bool = False) -> RowMatrix:
    """Pack sparse rows as (weight << log2(N_target)) | local_index, lane =
    target mod 32, local index = target // 32; short lanes padded (0, 0)."""
    q = quantize_weights(weights, fmt, raw)
    n_pre, n_post = q.shape
    padded = _ceil32(n_post)
    n_target = _next_pow2(max(padded // NUM_LANES, 1))
    log2nt = n_target.bit_length() - 1
    wmin, wmax = -(1 << (15 - log2nt)), (1 << (15 - log2nt)) - 1
    bad = np.argwhere((q != 0) & ((q < wmin) | (q > wmax)))
    if len(bad):
        i, j = bad[0]
        raise ModelError(
            f"compressed weight at synapse ({i}, {j}) = {q[i, j]} does not "
            f"fit {16 - log2nt}-bit field (range [{wmin}, {wmax}])")
    lanes: list[list[list[tuple[int, int]]]] = []
    max_len = 0
    for r in range(n_pre):
        tgts = np.flatnonzero(q[r])
        per_lane: list[list[tuple[int, int]]] = [[] for _ in range(NUM_LANES)]
        for t in tgts:
            per_lane[t % NUM_LANES].append((int(q[r, t]), int(t // NUM_LANES)))
        lanes.append(per_lane)
        max_len = max(max_len, max(len(pl) for pl in per_lane))
    row_vectors = max(max_len, 1)
    payload = np.zeros((n_pre, row_vectors * NUM_LANES), dtype=np.int16)
    sops = np.zeros(n_pre, dtype=np.int64)
    for r, per_lane in enumerate(lanes):
        for lane, entries in enumerate(per_lane):
            sops[r] += len(entries)
            for v, (w, idx) in enumerate(entries):
                packed = ((w << log2nt) | idx) & 0xFFFF
                payload[r, v * NUM_LANES + lane] = np.int16(
                    packed - 0x10000 if packed & 0x8000 else packed)
    total = payload.size
    return RowMatrix("compressed", n_pre, padded, row_vectors, payload, sops,
                     n_target=n_target,
                     padding_fraction=(total - int(sops.sum())) / total)


def build_delayed_rows(weights: np.ndarray, delays: np.ndarray, n_delay: int,
                       fmt: QFormat = S7_8, raw: bool = False) -> RowMatrix:
    """Dense-with-delay packing: (weight << log2(N_delay)) | delay, target
    neuron = vector base + lane."""
    if n_delay <= 0 or n_delay & (n_delay - 1):
        raise ModelError("n_delay must be a positive power of two")
    q = quantize_weights(weights, fmt, raw)
    d = np.asarray(delays, dtype=np.int64)
    if d.shape != q.shape:
        raise ModelError("delay matrix shape does not match weights")
    if (d < 0).any() or (d >= n_delay).any():
        bad = np.argwhere((d < 0) | (d >= n_delay))[0]
        raise ModelError(f"delay at synapse {tuple(bad)} = "
                         f"{d[tuple(bad)]} outside [0, {n_delay})")
    log2nd = n_delay.bit_length() - 1
    wmin, wmax = -(1 << (15 - log2nd)), (1 << (15 - log2nd)) - 1
    bad = np.argwhere((q != 0) & ((q < wmin) | (q > wmax)))
    if len(bad):
        i, j = bad[0]
        raise ModelError(
            f"delayed weight at synapse ({i}, {j}) = {q[i, j]} does not fit "
            f"{16 - log2nd}-bit field (range [{wmin}, {wmax}])")
    n_pre, n_post = q.shape
    padded = _ceil32(n_post)
    packed = np.zeros((n_pre, padded), dtype=np.int64)
    packed[:, :n_post] = (q << log2nd) | d
    payload = (packed & 0xFFFF).astype(np.uint16).view(np.int16)
    sops = np.count_nonzero(q, axis=1).astype(np.int64)
    return RowMatrix("delayed", n_pre, padded, padded // NUM_LANES, payload,
                     sops, n_delay=n_delay,
                     padding_fraction=1.0 - int(sops.sum()) / payload.size)


def build_rows(conn: Connection) -> RowMatrix:
    if conn.encoding == "dense":
        return build_dense_rows(conn.weights, conn.fmt, conn.raw)
    if conn.encoding == "compressed":
        return build_compressed_rows(conn.weights, conn.fmt, conn.raw)
    if conn.encoding == "delayed":
        if conn.delays is None:
            raise ModelError("delayed connection needs a delay matrix")
        n_delay = conn.n_delay
        if n_delay == 1:
            n_delay = _next_pow2(int(np.max(conn.delays)) + 1)
        return build_delayed_rows(conn.weights, conn.delays, n_delay,
                                  conn.fmt, conn.raw)
    raise ModelError(f"unknown encoding {conn.encoding!r}")


# ---------------------------------------------------------------------------
# Memory allocation
# ---------------------------------------------------------------------------

@dataclass
class MemoryPlan:
    t_addr: int = 0
    bitfields: dict[str, int] = field(default_factory=dict)   # name -> dmem addr
    var_addr: dict[tuple[str, str], tuple[str, int]] = field(default_factory=dict)
    weight_addr: list[tuple[str, int]] = field(default_factory=list)  # per conn
    dma_buffers: list[tuple[int, int] | None] = field(default_factory=list)
    llm_used: int = 0
    vmem_used: int = 0
    dmem_used: int = 0
    ext_used: int = 0


def allocate(model: Model, rows: list[RowMatrix],
             cfg: MemConfig | None = None) -> MemoryPlan:
    """Assign non-overlapping regions in every memory space.

    Weights go to vector memory when they fit (and placement is "auto");
    otherwise to external memory with two 64-byte-aligned row buffers in
    vector memory for DMA double-buffering.
    """
    cfg = cfg or MemConfig()
    plan = MemoryPlan()
    dmem = 4                       # word 0 holds the timestep
    for name in list(model.populations) + list(model.inputs):
        obj = model.populations.get(name) or model.inputs[name]
        n_words = obj.padded // NUM_LANES if isinstance(obj, Population) \
            else obj.n_words
        plan.bitfields[name] = dmem
        dmem += 4 * n_words
    if dmem > cfg.dmem_bytes:
        raise ModelError("scalar-memory bitfields exceed data memory")

    # Decide I placements from incoming encodings.
    incoming: dict[tuple[str, str], set[str]] = {}
    ndelay: dict[tuple[str, str], int] = {}
    for conn, rm in zip(model.connections, rows):
        key = (conn.dst, conn.target)
        incoming.setdefault(key, set()).add(conn.encoding)
        if conn.encoding == "delayed":
            if key in ndelay and ndelay[key] != rm.n_delay:
                raise ModelError(f"conflicting n_delay for {key}")
            ndelay[key] = rm.n_delay
    placements: dict[tuple[str, str], str] = {}
    for key, encs in incoming.items():
        if "delayed" in encs and encs != {"delayed"}:
            raise ModelError(f"{key}: delayed targets cannot mix encodings")
        if "compressed" in encs and "dense" in encs:
            raise ModelError(f"{key}: dense and compressed propagation "
                             "disagree on memory placement")
        placements[key] = ("llm_delay" if "delayed" in encs else
                           "llm" if "compressed" in encs else "vmem")

    vmem = 0
    llm = 0
    for pname, pop in model.populations.items():
        for vname, var in pop.variables.items():
            pl = var.placement or placements.get((pname, vname), "vmem")
            var.placement = pl
            nvec = pop.n_words
            if pl == "vmem":
                plan.var_addr[(pname, vname)] = ("vmem", vmem)
                vmem += nvec * 64
            elif pl == "llm":
                plan.var_addr[(pname, vname)] = ("llm", llm)
                llm += nvec
            else:
                nd = ndelay.get((pname, vname), 1)
                plan.var_addr[(pname, vname)] = ("llm_delay", llm)
                llm += nvec * nd
    if llm > cfg.llm_halfwords_per_lane:
        raise ModelError(
            f"lane-local memory exhausted: need {llm} halfwords/lane, "
            f"have {cfg.llm_halfwords_per_lane}")

    # Weights: vmem if they fit, else external with two DMA row buffers.
    ext = 0
    for conn, rm in zip(model.connections, rows):
        nbytes = rm.payload.size * 2
        place = conn.placement
        if place == "auto":
            place = "vmem" if vmem + nbytes <= cfg.vmem_bytes // 2 else "external"
        if place == "vmem":
            if vmem + nbytes > cfg.vmem_bytes:
                raise ModelError("vector memory exhausted by weights")
            plan.weight_addr.append(("vmem", vmem))
            plan.dma_buffers.append(None)
            vmem += nbytes
        else:
            plan.weight_addr.append(("external", ext))
            ext += rm.n_pre * rm.stride_bytes
            b0, b1 = vmem, vmem + rm.stride_bytes
            vmem += 2 * rm.stride_bytes
            plan.dma_buffers.append((b0, b1))
    if vmem > cfg.vmem_bytes:
        raise ModelError("vector memory exhausted")
    plan.llm_used, plan.vmem_used = llm, vmem
    plan.dmem_used, plan.ext_used = dmem, ext
    return plan


# ---------------------------------------------------------------------------
# Elaboration
# ---------------------------------------------------------------------------

@dataclass
class Elaborated:
    model: Model
    rows: list[RowMatrix]
    plan: MemoryPlan
    program: str
    image: ProgramImage
    machine: Machine
    core: PipelinedCore
    cfg: MemConfig


def elaborate(model: Model, cfg: MemConfig | None = None,
              seed: int = 0) -> Elaborated:
    cfg = cfg or MemConfig()
    rows = [build_rows(c) for c in model.connections]
    plan = allocate(model, rows, cfg)
    rng = np.random.default_rng(seed)

    lines: list[str] = ["main:"]
    lines.append(f"    csrwi {hex(isa.CSR_PERF_REGION)}, 2")
    for pname, pop in model.populations.items():
        vlay = {}
        for vname, var in pop.variables.items():
            space, base = plan.var_addr[(pname, vname)]
            vlay[vname] = dslc.VarLayout(space, base if space != "vmem"
                                         else base)
        nd = max((rm.n_delay for c, rm in zip(model.connections, rows)
                  if c.dst == pname and c.encoding == "delayed"), default=1)
        klay = dslc.KernelLayout(
            n=pop.padded, vars=vlay,
            events={pop.kernel.events[0]: plan.bitfields[pname]}
            if pop.kernel.events else {},
            n_delay=nd, t_addr=plan.t_addr)
        lines += dslc.compile_kernel(pop.kernel, klay, tag=pname)
        # Padding lanes must never look like spikes to the propagation
        # phase (their rows do not exist), so mask the tail bitfield word.
        pad = pop.padded - pop.shape
        if pad and pop.kernel.events:
            addr = plan.bitfields[pname] + 4 * (pop.n_words - 1)
            lines += [f"    li t0, {addr}",
                      "    lw t1, 0(t0)",
                      f"    li t2, {(1 << (NUM_LANES - pad)) - 1}",
                      "    and t1, t1, t2",
                      "    sw t1, 0(t0)"]

    lines.append(f"    csrwi {hex(isa.CSR_PERF_REGION)}, 1")
    routines: list[str] = []
    for ci, (conn, rm) in enumerate(zip(model.connections, rows)):
        space, wbase = plan.weight_addr[ci]
        tspace, tbase = plan.var_addr[(conn.dst, conn.target)]
        label = f"row_{ci}"
        play = kernels.PropLayout(
            encoding=rm.encoding,
            n_post=rm.n_target * NUM_LANES if rm.encoding == "compressed"
            else rm.n_post,
            i_base=tbase, row_vectors=rm.row_vectors,
            n_delay=rm.n_delay, t_addr=plan.t_addr)
        routines += kernels.gen_propagate(play, label)
        src_obj = model.populations.get(conn.src) or model.inputs[conn.src]
        n_words = (src_obj.padded // NUM_LANES
                   if isinstance(src_obj, Population) else src_obj.n_words)
        buf = plan.dma_buffers[ci]
        slay = kernels.ScanLayout(
            bitfield_base=plan.bitfields[conn.src], n_words=n_words,
            row_routine=label, stride_bytes=rm.stride_bytes,
            weights="vmem" if space == "vmem" else "external",
            w_base=wbase, buf0=buf[0] if buf else 0,
            buf1=buf[1] if buf else 0, row_bytes=rm.stride_bytes)
        lines += kernels.gen_spike_scan(slay, tag=f"scan_{ci}")

    lines.append(f"    csrwi {hex(isa.CSR_PERF_REGION)}, 0")
    lines += ["    li a0, 0", "    ecall"]
    program = ".text\n" + "\n".join(lines + routines) + "\n"
    image = Assembler().assemble(program)

    machine = Machine(cfg)
    machine.load_image(image)
    _init_state(model, rows, plan, machine, rng)
    core = PipelinedCore(machine)
    return Elaborated(model, rows, plan, program, image, machine, core, cfg)


def _init_value(var: Variable, padded: int, rng) -> np.ndarray:
    if callable(var.init):
        vals = np.asarray(var.init(rng, var.shape))
    else:
        vals = np.broadcast_to(np.asarray(var.init), (var.shape,))
    if vals.dtype.kind == "f":
        raw = np.clip(np.floor(vals * var.fmt.scale + 0.5), -32768, 32767)
    else:
        raw = vals
    out = np.zeros(padded, dtype=np.int16)
    out[:var.shape] = raw.astype(np.int16)
    return out


def _init_state(model: Model, rows, plan: MemoryPlan, m: Machine, rng) -> None:
    for pname, pop in model.populations.items():
        nvec = pop.n_words
        for vname, var in pop.variables.items():
            space, base = plan.var_addr[(pname, vname)]
            raw = _init_value(var, pop.padded, rng)
            if space == "vmem":
                m.vmem[base // 2:base // 2 + pop.padded] = raw
            elif space == "llm":
                m.llm[:, base:base + nvec] = raw.reshape(nvec, NUM_LANES).T
            else:
                # Delay buffers start zeroed; a nonzero init would land in
                # every slot at once, which has no physical meaning.
                if np.any(raw):
                    raise ModelError(
                        f"{pname}.{vname}: delayed-input variables must "
                        "initialise to zero")
    for ci, (conn, rm) in enumerate(zip(model.connections, rows)):
        space, base = plan.weight_addr[ci]
        flat = rm.payload.reshape(-1)
        if space == "vmem":
            m.vmem[base // 2:base // 2 + flat.size] = flat
        else:
            m.ensure_external(base + rm.n_pre * rm.stride_bytes)
            raw = flat.view(np.uint16).astype("<u2").tobytes()
            m.ext[base:base + len(raw)] = np.frombuffer(raw, np.uint8)


# ---------------------------------------------------------------------------
# Simulation loop
# ---------------------------------------------------------------------------

@dataclass
class SimOutputs:
    spikes: dict[str, np.ndarray]            # name -> (T, n_words) uint32
    recorded: dict[tuple[str, str], np.ndarray]
    cycles: int
    instret: int
    region_cycles: dict[int, int]
    sops: int

    def spike_count(self, name: str) -> int:
        return int(np.unpackbits(
            self.spikes[name].view(np.uint8), bitorder="little").sum())


def run(elab: Elaborated, inputs: dict[str, np.ndarray] | None = None,
        T: int = 1, record: list[tuple[str, str]] = (),
        max_cycles_per_step: int = 200_000_000) -> SimOutputs:
    """Run T timesteps.  ``inputs``: container name -> (T, n_words) uint32
    raster.  ``record``: (population, variable) pairs sampled after every
    step."""
    m, core = elab.machine, elab.core
    model, plan = elab.model, elab.plan
    inputs = inputs or {}
    for name, raster in inputs.items():
        if name not in model.inputs:
            raise ModelError(f"unknown input container {name!r}")
        want = (T, model.inputs[name].n_words)
        if raster.shape != want:
            raise ModelError(f"input raster {name!r} has shape "
                             f"{raster.shape}, expected {want}")
    rasters = {p: np.zeros((T, model.populations[p].n_words), dtype=np.uint32)
               for p in model.populations}
    recorded = {key: [] for key in record}
    sops = 0
    for t in range(T):
        m.dmem[0:4] = struct.pack("<I", t)
        for name, raster in inputs.items():
            base = plan.bitfields[name]
            row = raster[t].copy()
            _mask_tail(row, model.inputs[name].shape)
            m.dmem[base:base + 4 * len(row)] = row.tobytes()
        m.pc = 0
        info = core.run(max_cycles_per_step)
        if info.timed_out:
            raise SimTrap(f"timestep {t} exceeded {max_cycles_per_step} cycles")
        if info.exit_code != 0:
            raise SimTrap(f"timestep {t} exited with code {info.exit_code}")
        for p in rasters:
            base = plan.bitfields[p]
            nw = model.populations[p].n_words
            words = np.frombuffer(bytes(m.dmem[base:base + 4 * nw]),
                                  dtype=np.uint32).copy()
            _mask_tail(words, model.populations[p].shape)
            rasters[p][t] = words
        for conn, rm in zip(model.connections, elab.rows):
            if conn.src in rasters:
                spk = _raster_ids(rasters[conn.src][t])
            elif conn.src in inputs:
                row = inputs[conn.src][t].copy()
                _mask_tail(row, model.inputs[conn.src].shape)
                spk = _raster_ids(row)
            else:
                spk = []
            sops += int(rm.sops[spk].sum()) if len(spk) else 0
        for (pname, vname) in record:
            recorded[(pname, vname)].append(
                read_variable(elab, pname, vname).copy())
    return SimOutputs(rasters,
                      {k: np.stack(v) for k, v in recorded.items()},
                      m.cycles, m.instret, dict(m.region_cycles), sops)


def _mask_tail(words: np.ndarray, shape: int) -> None:
    pad = len(words) * NUM_LANES - shape
    if pad:
        words[-1] &= np.uint32((1 << (NUM_LANES - pad)) - 1)


def _raster_ids(words: np.ndarray) -> np.ndarray:
    bits = np.unpackbits(words.view(np.uint8), bitorder="little")
    return np.flatnonzero(bits)


def read_variable(elab: Elaborated, pname: str, vname: str) -> np.ndarray:
    pop = elab.model.populations[pname]
    space, base = elab.plan.var_addr[(pname, vname)]
    m = elab.machine
    nvec = pop.n_words
    if space == "vmem":
        return np.asarray(m.vmem[base // 2:base // 2 + pop.padded])[:pop.shape]
    if space == "llm":
        return np.asarray(m.llm[:, base:base + nvec]).T.reshape(-1)[:pop.shape]
    raise ModelError(f"cannot read delay-buffer variable {pname}.{vname} "
                     "as a flat array")


# ---------------------------------------------------------------------------
# Spike I/O: text event lists and the FSPK packed-bitfield format
# ---------------------------------------------------------------------------

FSPK_MAGIC = b"FSPK"


def events_to_raster(events, shape: int, T: int) -> np.ndarray:
    """events: iterable of (t, neuron_id) -> (T, n_words) uint32."""
    n_words = _ceil32(shape) // NUM_LANES
    raster = np.zeros((T, n_words), dtype=np.uint32)
    for t, n in events:
        if not 0 <= t < T:
            raise ModelError(f"event time {t} outside [0, {T})")
        if not 0 <= n < shape:
            raise ModelError(f"event neuron {n} outside [0, {shape})")
        raster[t, n // NUM_LANES] |= np.uint32(1 << (n % NUM_LANES))
    return raster


def raster_to_events(raster: np.ndarray) -> list[tuple[int, int]]:
    out = []
    for t in range(raster.shape[0]):
        for n in _raster_ids(raster[t]):
            out.append((t, int(n)))
    return out


def read_event_list(path) -> list[tuple[int, int]]:
    events = []
    for ln, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.split("#")[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 2:
            raise ModelError(f"{path}:{ln}: expected 't neuron_id'")
        events.append((int(parts[0]), int(parts[1])))
    return events


def write_event_list(path, events) -> None:
    Path(path).write_text("".join(f"{t} {n}\n" for t, n in events))


def write_fspk(path, raster: np.ndarray, shape: int) -> None:
    """Header: magic 'FSPK', u32 version=1, u32 shape, u32 T; then T rows
    of ceil(shape/32) little-endian u32 bitfield words."""
    T, n_words = raster.shape
    with open(path, "wb") as f:
        f.write(FSPK_MAGIC)
        f.write(struct.pack("<III", 1, shape, T))
        f.write(raster.astype("<u4").tobytes())


def read_fspk(path) -> tuple[np.ndarray, int]:
    data = Path(path).read_bytes()
    if data[:4] != FSPK_MAGIC:
        raise ModelError(f"{path}: not an FSPK file")
    version, shape, T = struct.unpack_from("<III", data, 4)
    if version != 1:
        raise ModelError(f"{path}: unsupported FSPK version {version}")
    n_words = _ceil32(shape) // NUM_LANES
    words = np.frombuffer(data, dtype="<u4", offset=16, count=T * n_words)
    return words.reshape(T, n_words).astype(np.uint32), shape


# ---------------------------------------------------------------------------
# JSON network descriptions
# ---------------------------------------------------------------------------

def load_model(path) -> Model:
    """Load a network description file (JSON; see README for the schema).
    Weight/delay matrices are .npy files referenced relative to the model
    file."""
    path = Path(path)
    doc = json.loads(path.read_text())
    model = Model(doc.get("name", path.stem))
    for p in doc.get("populations", []):
        params = {name: (spec["value"], QFormat.parse(spec["format"]))
                  for name, spec in p.get("params", {}).items()}
        variables = {}
        var_fmts = {}
        for name, spec in p.get("vars", {}).items():
            fmt = QFormat.parse(spec["format"])
            init = spec.get("init", 0)
            if isinstance(init, str):
                init = np.load(path.parent / init)
            variables[name] = Variable(name, p["shape"], fmt, init)
            var_fmts[name] = fmt
        src = dslc.KernelSource(code=p["kernel"], params=params,
                                vars=var_fmts,
                                events=tuple(p.get("events", [])))
        model.add_population(Population(p["name"], p["shape"], src, variables))
    for i in doc.get("inputs", []):
        model.add_input(i["name"], i["shape"])
    for c in doc.get("connections", []):
        weights = np.load(path.parent / c["weights"])
        delays = np.load(path.parent / c["delays"]) if "delays" in c else None
        model.connect(Connection(
            src=c["src"], dst=c["dst"], encoding=c.get("encoding", "dense"),
            weights=weights, fmt=QFormat.parse(c.get("format", "s7_8_sat_t")),
            target=c.get("target", "I"), delays=delays,
            n_delay=c.get("n_delay", 1),
            placement=c.get("placement", "auto"),
            raw=c.get("raw", False)))
    return model
