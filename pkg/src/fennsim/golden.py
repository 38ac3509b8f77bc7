"""Host-side reference models.

Three oracles, in decreasing strictness:

* :class:`GoldenEngine` - bit-exact fixed-point model of a whole network.
  It reuses the DSL interpreter for neuron updates and replays event
  propagation with the same fxp operations in the same canonical order as
  the generated code (ascending bitfield word, descending bit, connection
  by connection), so its state must equal the simulator's exactly.
* :func:`queue_oracle_run` - an independent check of delay semantics: an
  explicit per-spike arrival queue instead of circular slot buffers.
* :func:`float_oracle_run` - double-precision LIF dynamics, used only to
  bound quantization error, never for bit comparisons.

The golden engine also carries an analytic cycle accountant that mirrors
the generated program block by block (verified cycle-exact against the
instruction simulator by the test suite), which makes large benchmark
runs tractable.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import dslc, isa, kernels, net
from .asm import Assembler
from .fxp import RoundMode
from .prng import LaneRng
from .sim import DEFAULT_CYCLES, CycleModel

NUM_LANES = 32


def _sat16(x):
    return np.clip(x, -32768, 32767)


# ---------------------------------------------------------------------------
# Straight-line cycle costing
# ---------------------------------------------------------------------------

def straightline_cycles(lines: list[str],
                        timing: CycleModel = DEFAULT_CYCLES) -> int:
    """Exact pipeline cost of a straight-line assembly block (no branches
    taken, no traps): one cycle per instruction plus load-use stalls, plus
    the jump penalty for a trailing ret/jal/jalr if present."""
    src = ".text\n" + "\n".join(lines) + "\n"
    img = Assembler().assemble(src)
    code = b""
    for s in img.sections:
        if s.space == 0:
            code = bytes(s.data)
    cycles = 0
    prev_load = None
    for off in range(0, len(code), 4):
        word = int.from_bytes(code[off:off + 4], "little")
        i = isa.decode(word)
        cycles += 1
        srcs = _hazard_srcs(i)
        if prev_load is not None and prev_load in srcs:
            cycles += timing.load_use_stall
        prev_load = _load_dest(i)
        if i.mnemonic in ("jal", "jalr"):
            cycles += timing.branch_taken_penalty
    return cycles


def _hazard_srcs(i) -> set:
    srcs = set()
    mn = i.mnemonic
    if mn in isa.VEC_RS1:
        srcs.add(("v", i.rs1))
    if mn in isa.VEC_RS2:
        srcs.add(("v", i.rs2))
    scalar_rs1 = (not i.is_vector and mn not in
                  ("lui", "auipc", "jal", "ecall", "ebreak", "fence",
                   "csrrwi", "csrrsi", "csrrci")) or mn in (
        "vload.v", "vload.r0", "vload.r1", "vstore.v", "vfill", "vsel",
        "vandadd", "jalr")
    if scalar_rs1 and i.rs1:
        srcs.add(("x", i.rs1))
    if not i.is_vector and i.rs2 and mn in (
            "add", "sub", "sll", "slt", "sltu", "xor", "srl", "sra", "or",
            "and", "mul", "mulh", "mulhsu", "mulhu", "div", "divu", "rem",
            "remu", "sb", "sh", "sw", "beq", "bne", "blt", "bge", "bltu",
            "bgeu"):
        srcs.add(("x", i.rs2))
    return srcs


def _load_dest(i):
    if i.mnemonic in isa.VECTOR_LOADS:
        return ("v", i.rd)
    if i.mnemonic in isa.SCALAR_LOADS and i.rd:
        return ("x", i.rd)
    return None


def _li_cost(v: int) -> int:
    return 1 if -2048 <= v <= 2047 else 2


# ---------------------------------------------------------------------------
# Golden network engine
# ---------------------------------------------------------------------------

@dataclass
class GoldenOutputs:
    spikes: dict[str, np.ndarray]
    recorded: dict[tuple[str, str], np.ndarray]
    cycles: int
    region_cycles: dict[int, int]
    sops: int


class GoldenEngine:
    """Bit-exact fixed-point replica of an elaborated network, plus the
    analytic cycle accountant."""

    def __init__(self, model: net.Model, seed: int = 0,
                 timing: CycleModel = DEFAULT_CYCLES,
                 plan: net.MemoryPlan | None = None,
                 cfg=None):
        self.model = model
        self.timing = timing
        self.rows = [net.build_rows(c) for c in model.connections]
        self.plan = plan or net.allocate(model, self.rows, cfg)
        rng = np.random.default_rng(seed)
        self.state: dict[str, dict[str, np.ndarray]] = {}
        self.delay_buf: dict[tuple[str, str], np.ndarray] = {}
        self.interp: dict[str, dslc.Interpreter] = {}
        self.lane_rng = LaneRng()
        for pname, pop in model.populations.items():
            st = {}
            for vname, var in pop.variables.items():
                raw = net._init_value(var, pop.padded, rng).astype(np.int64)
                space, _ = self.plan.var_addr[(pname, vname)]
                if space == "llm_delay":
                    nd = next(rm.n_delay for c, rm in
                              zip(model.connections, self.rows)
                              if c.dst == pname and c.encoding == "delayed")
                    self.delay_buf[(pname, vname)] = np.zeros(
                        (pop.padded, nd), dtype=np.int64)
                st[vname] = raw
            self.state[pname] = st
            self.interp[pname] = dslc.Interpreter(pop.kernel,
                                                  rng=self.lane_rng)
        self._accountant = _CycleAccountant(model, self.rows, self.plan,
                                            timing)

    def run(self, inputs: dict[str, np.ndarray] | None = None, T: int = 1,
            record=()) -> GoldenOutputs:
        model = self.model
        inputs = inputs or {}
        rasters = {p: np.zeros((T, model.populations[p].n_words),
                               dtype=np.uint32) for p in model.populations}
        recorded = {k: [] for k in record}
        sops = 0
        self._accountant.reset()
        for t in range(T):
            self._accountant.begin_step()
            # Phase 1: neuron updates.
            for pname, pop in model.populations.items():
                st = self.state[pname]
                for vname in st:
                    if (pname, vname) in self.delay_buf:
                        buf = self.delay_buf[(pname, vname)]
                        st[vname] = buf[:, t % buf.shape[1]].copy()
                masks: dict[str, list] = {}
                new = self.interp[pname].run(st, masks)
                for vname in st:
                    if (pname, vname) in self.delay_buf:
                        buf = self.delay_buf[(pname, vname)]
                        buf[:, t % buf.shape[1]] = new[vname]
                    st[vname] = new[vname]
                self.state[pname] = st
                if pop.kernel.events:
                    words = np.array(masks[pop.kernel.events[0]],
                                     dtype=np.uint64).astype(np.uint32)
                    net._mask_tail(words, pop.shape)
                    rasters[pname][t] = words
                self._accountant.update(pname)
            # Phase 2: event propagation, canonical spike order.
            for ci, (conn, rm) in enumerate(zip(model.connections, self.rows)):
                if conn.src in rasters:
                    words = rasters[conn.src][t]
                else:
                    words = inputs[conn.src][t].copy()
                    net._mask_tail(words, model.inputs[conn.src].shape)
                spikes_by_word = _spikes_by_word(words)
                for w, bits in spikes_by_word:
                    for src_id in bits:
                        self._propagate(ci, conn, rm, src_id, t)
                        sops += int(rm.sops[src_id])
                self._accountant.scan(ci, spikes_by_word)
            self._accountant.end_step()
            for key in record:
                pname, vname = key
                shape = model.populations[pname].shape
                recorded[key].append(self.state[pname][vname][:shape].copy())
        return GoldenOutputs(rasters,
                             {k: np.stack(v) for k, v in recorded.items()},
                             self._accountant.cycles,
                             dict(self._accountant.region_cycles), sops)

    def _propagate(self, ci: int, conn: net.Connection, rm: net.RowMatrix,
                   src_id: int, t: int) -> None:
        key = (conn.dst, conn.target)
        row = rm.payload[src_id].astype(np.int64)
        if rm.encoding == "dense":
            I = self.state[conn.dst][conn.target]
            I[:] = _sat16(I + row)
            return
        bits = (rm.n_target if rm.encoding == "compressed"
                else rm.n_delay).bit_length() - 1
        w = (row >> bits).reshape(rm.row_vectors, NUM_LANES)
        lo = (row & ((1 << bits) - 1)).reshape(rm.row_vectors, NUM_LANES)
        lane = np.arange(NUM_LANES)
        if rm.encoding == "compressed":
            I = self.state[conn.dst][conn.target]
            view = I.reshape(-1, NUM_LANES)        # [local_index, lane]
            for v in range(rm.row_vectors):
                idx = lo[v]
                view[idx, lane] = _sat16(view[idx, lane] + w[v])
        else:
            buf = self.delay_buf[key]              # [neuron, slot]
            nd = rm.n_delay
            view = buf.reshape(-1, NUM_LANES, nd)  # [vector, lane, slot]
            slot = (lo + t + 1) & (nd - 1)
            for v in range(rm.row_vectors):
                s = slot[v]
                view[v, lane, s] = _sat16(view[v, lane, s] + w[v])


def _spikes_by_word(words: np.ndarray) -> list[tuple[int, list[int]]]:
    """Canonical dispatch order: ascending word, descending bit."""
    out = []
    for w, word in enumerate(words):
        word = int(word)
        if word:
            bits = [w * NUM_LANES + b for b in range(31, -1, -1)
                    if word >> b & 1]
            out.append((w, bits))
        else:
            out.append((w, []))
    return out


# ---------------------------------------------------------------------------
# Cycle accountant
# ---------------------------------------------------------------------------

class _CycleAccountant:
    """Mirrors the elaborated program's timing block by block.

    Block costs for the straight-line parts (update kernels, row routines)
    come from :func:`straightline_cycles` on the very generator output the
    program contains; the spike scan's control flow is replayed here with
    the pipeline's branch/stall constants, including the DMA wait loops.
    """

    def __init__(self, model: net.Model, rows, plan: net.MemoryPlan, timing):
        self.timing = timing
        self.model = model
        self.rows = rows
        self.plan = plan
        B = timing.branch_taken_penalty
        self.update_cost = {}
        for pname, pop in model.populations.items():
            vlay = {v: dslc.VarLayout(*plan.var_addr[(pname, v)])
                    for v in pop.variables}
            nd = max((rm.n_delay for c, rm in zip(model.connections, rows)
                      if c.dst == pname and c.encoding == "delayed"),
                     default=1)
            klay = dslc.KernelLayout(
                n=pop.padded, vars=vlay,
                events={pop.kernel.events[0]: plan.bitfields[pname]}
                if pop.kernel.events else {}, n_delay=nd, t_addr=plan.t_addr)
            lines = dslc.compile_kernel(pop.kernel, klay, tag=pname)
            pad = pop.padded - pop.shape
            if pad and pop.kernel.events:
                addr = plan.bitfields[pname] + 4 * (pop.n_words - 1)
                lines += [f"    li t0, {addr}", "    lw t1, 0(t0)",
                          f"    li t2, {(1 << (NUM_LANES - pad)) - 1}",
                          "    and t1, t1, t2", "    sw t1, 0(t0)"]
            self.update_cost[pname] = straightline_cycles(lines, timing)
        self.row_cost = []
        self.scan_meta = []
        for ci, (conn, rm) in enumerate(zip(model.connections, rows)):
            space, wbase = plan.weight_addr[ci]
            tspace, tbase = plan.var_addr[(conn.dst, conn.target)]
            play = kernels.PropLayout(
                encoding=rm.encoding,
                n_post=rm.n_target * NUM_LANES if rm.encoding == "compressed"
                else rm.n_post,
                i_base=tbase, row_vectors=rm.row_vectors,
                n_delay=rm.n_delay, t_addr=plan.t_addr)
            routine = kernels.gen_propagate(play, f"row_{ci}")
            # Cost excluding the trailing ret, which we add with its
            # penalty explicitly.
            self.row_cost.append(
                straightline_cycles(routine[:-1], timing) + 1 + B)
            buf = plan.dma_buffers[ci]
            self.scan_meta.append({
                "external": space == "external",
                "bitfield": plan.bitfields[conn.src],
                "stride": rm.stride_bytes,
                "w_base": wbase,
                "row_bytes": rm.stride_bytes,
                "buf": buf,
            })
        self.reset()

    def reset(self):
        self.cycles = 0
        self.region_cycles = {}
        self.region = 0

    def _add(self, region: int, n: int):
        self.cycles += n
        self.region_cycles[region] = self.region_cycles.get(region, 0) + n

    def begin_step(self):
        t = self.timing
        self._add(0, t.pipeline_fill)   # fill charged to the idle region
        self._add(2, 1)                 # csrwi region, 2

    def update(self, pname: str):
        self._add(2, self.update_cost[pname])

    def end_step(self):
        self._add(0, 1)                 # csrwi region, 0
        self._add(0, 2)                 # li a0, 0; ecall

    # -- spike scan -----------------------------------------------------

    def scan(self, ci: int, spikes_by_word) -> None:
        t = self.timing
        B = t.branch_taken_penalty
        meta = self.scan_meta[ci]
        if ci == 0:
            self._add(1, 1)             # csrwi region, 1
        cost = _li_cost(meta["bitfield"])
        external = meta["external"]
        if external:
            b0, b1 = meta["buf"]
            cost += _li_cost(b0) + _li_cost(b1) + 1   # li s6 / li s7 / li s8
        stride = meta["stride"]
        pow2 = stride & (stride - 1) == 0
        row = self.row_cost[ci]
        dma_complete = -1
        pending = False
        for w, bits in spikes_by_word:
            if not bits:
                cost += 2 + t.load_use_stall + B   # lw, stall, beqz taken
                continue
            cost += 2 + t.load_use_stall           # lw, stall, beqz not taken
            cost += _li_cost((w + 1) * 32)         # li s2
            for k, _src in enumerate(bits):
                cost += 5                          # clz/sll/slli/sub/addi
                cost += 1 if pow2 else _li_cost(stride) + 1
                if not external:
                    cost += _li_cost(meta["w_base"]) + 1    # li t0; add a0
                    cost += 1 + B                           # jal
                    cost += row
                else:
                    cost, dma_complete, pending = self._dma_spike(
                        cost, dma_complete, pending, meta, row)
                cost += (1 + B) if k + 1 < len(bits) else 1  # bnez loop
        if external:
            if pending:
                cost += 1                                   # beqz not taken
                cost += self._wait(cost, dma_complete)
                cost += 1 + 1 + B + row                     # mv a0; jal; row
            else:
                cost += 1 + B                               # beqz taken
        self._add(1, cost)

    def _wait(self, cost: int, dma_complete: int) -> int:
        """Cycles of the status poll loop entered at relative cycle
        ``cost`` (the loop reads busy while now < completion)."""
        now = self.cycles + cost
        waited = 0
        while now + waited < dma_complete:
            waited += 4                 # csrr + bnez taken
        return waited + 2               # final csrr + bnez not taken

    def _dma_spike(self, cost, dma_complete, pending, meta, row):
        t = self.timing
        B = t.branch_taken_penalty
        cost += self._wait(cost, dma_complete)
        cost += _li_cost(meta["w_base"]) + 1 + 1 + 1   # li; add; csrw; csrw
        cost += _li_cost(meta["row_bytes"]) + 1        # li; csrw bytes
        # csrwi ctrl issues the transfer; the issue timestamp is the cycle
        # count before the instruction's cost is charged.
        issue = self.cycles + cost
        cost += 1
        dma_complete = self.timing.dma_completion(issue, meta["row_bytes"])
        if pending:
            cost += 1                   # beqz not taken
            cost += 1 + 1 + B + row     # mv a0; jal; routine
        else:
            cost += 1 + B               # beqz taken
        cost += 4                       # buffer swap mvs
        return cost, dma_complete, True


# ---------------------------------------------------------------------------
# Independent oracles
# ---------------------------------------------------------------------------

def queue_oracle_run(model: net.Model, inputs, T: int, seed: int = 0):
    """Delay semantics via explicit arrival queues: every spike schedules
    per-synapse arrivals at t + 1 + delay; arrivals for a step accumulate
    in emission order before that step's update.  Returns spike rasters.

    Restricted to single-population recurrent/feed-forward graphs whose
    kernels are the standard LIF (it reuses the DSL interpreter for the
    neuron model but replaces all slot-buffer machinery)."""
    rng = np.random.default_rng(seed)
    inputs = inputs or {}
    rasters = {p: np.zeros((T, model.populations[p].n_words), dtype=np.uint32)
               for p in model.populations}
    state = {}
    interp = {}
    lane_rng = LaneRng()
    rowsets = []
    for pname, pop in model.populations.items():
        state[pname] = {v: net._init_value(var, pop.padded, rng).astype(np.int64)
                        for v, var in pop.variables.items()}
        interp[pname] = dslc.Interpreter(pop.kernel, rng=lane_rng)
    for conn in model.connections:
        q = net.quantize_weights(conn.weights, conn.fmt, conn.raw)
        d = (np.zeros_like(q) if conn.delays is None
             else np.asarray(conn.delays, dtype=np.int64))
        rowsets.append((q, d))
    # arrivals[t'] = list of (dst, target, weight-row, active-mask) in order
    arrivals: dict[int, list] = {}
    for t in range(T):
        # update
        for pname, pop in model.populations.items():
            masks: dict[str, list] = {}
            state[pname] = interp[pname].run(state[pname], masks)
            if pop.kernel.events:
                words = np.array(masks[pop.kernel.events[0]],
                                 dtype=np.uint64).astype(np.uint32)
                net._mask_tail(words, pop.shape)
                rasters[pname][t] = words
        # deliver arrivals scheduled for the *next* update into I now
        # (propagation phase of step t fills I consumed at t+1)
        for conn, (q, d) in zip(model.connections, rowsets):
            words = (rasters[conn.src][t] if conn.src in rasters
                     else inputs[conn.src][t])
            for w, bits in _spikes_by_word(np.asarray(words)):
                for src_id in bits:
                    if src_id >= q.shape[0]:
                        continue
                    for delay in np.unique(d[src_id]):
                        sel = d[src_id] == delay
                        arrivals.setdefault(t + 1 + int(delay), []).append(
                            (conn.dst, conn.target, q[src_id] * sel))
        for dst, target, wrow in arrivals.pop(t + 1, []):
            I = state[dst][target]
            I[:len(wrow)] = _sat16(I[:len(wrow)] + wrow)
    return rasters


def float_oracle_run(alpha: float, v_thresh: float, weights: np.ndarray,
                     input_raster: np.ndarray, T: int,
                     v_init: np.ndarray | None = None,
                     bias: float = 0.0):
    """Double-precision LIF reference for quantization-error bounds.

    Feed-forward: input spikes (T, n_pre bool) drive one LIF layer through
    a dense float weight matrix.  Returns (V trace (T, n), spike raster)."""
    n = weights.shape[1]
    V = np.zeros(n) if v_init is None else v_init.astype(np.float64).copy()
    I = np.zeros(n)
    vs, spikes = [], []
    for t in range(T):
        V = alpha * V + I + bias
        z = V >= v_thresh
        V = np.where(z, V - v_thresh, V)
        I = np.zeros(n)
        if input_raster is not None:
            I = input_raster[t].astype(np.float64) @ weights
        vs.append(V.copy())
        spikes.append(z)
    return np.array(vs), np.array(spikes)
