"""Canonical generated assembly routines: neuron update, the three
event-propagation algorithms, and the CLZ spike scan with DMA
double-buffering.

All generators emit assembler text (lists of source lines).  Register
conventions, shared with the network elaborator:

* ``a0`` (x10) carries the row base address into propagation routines and
  the exit code into ``ecall``.
* ``t0``-``t6`` are scratch, freely clobbered by every generated routine.
* ``s``-registers hold spike-scan state and the per-vector delay-slot
  bases of the delayed propagation routine; leaf routines never touch
  them.
* Vector registers v1-v8 are scratch everywhere (no callee saving).

Steady-state inner loops are fully unrolled with immediate offsets so the
measured bodies contain no address bookkeeping: 4 instructions/vector for
dense, 6 for compressed, 7 for delayed, each arranged so operand
forwarding leaves no load-use stall.  Generators can bracket the unrolled
body with writes to the performance-region CSR so a harness can read the
body's cycle count in isolation.
"""

from __future__ import annotations

from dataclasses import dataclass

from . import isa

NUM_LANES = 32
# Largest number of 64-byte vectors addressable from one base register with
# the store offset and the one-ahead prefetch offset both within the signed
# 12-bit immediate range.
WINDOW_VECTORS = 31
# Delayed propagation keeps one scalar base register per vector; beyond this
# many vectors it falls back to bumping a single register inline (one extra
# cycle per vector).
DELAYED_PRECOMP_VECTORS = 10
# Per-vector slot-base registers for delayed propagation.  These must stay
# disjoint from the spike scan's s-register state, because the scan calls
# the routine per spike: a-regs and high t-regs are caller-clobbered here.
_DELAYED_BASE_REGS = ["a1", "a2", "a3", "a4", "a5", "a6", "a7", "t3", "t4", "t5"]


def _log2(n: int, what: str) -> int:
    if n <= 0 or n & (n - 1):
        raise ValueError(f"{what} must be a positive power of two, got {n}")
    return n.bit_length() - 1


def _nvec(n: int, what: str = "neuron count") -> int:
    if n <= 0 or n % NUM_LANES:
        raise ValueError(f"{what} must be a positive multiple of {NUM_LANES}")
    return n // NUM_LANES


@dataclass
class UpdateLayout:
    """Placement of one population's state for the neuron-update routine."""

    n: int                      # neurons (multiple of 32)
    v_base: int                 # vmem byte address of V
    i_base: int                 # vmem byte address, or lane-local halfword base
    bitfield_base: int          # scalar-memory byte address of the spike bitfield
    i_placement: str = "vmem"   # "vmem" | "llm" | "llm_delay"
    n_delay: int = 1            # delay slots when i_placement == "llm_delay"
    t_addr: int = 0             # scalar-memory word holding the timestep

    def __post_init__(self):
        _nvec(self.n)
        if self.i_placement not in ("vmem", "llm", "llm_delay"):
            raise ValueError(f"bad I placement {self.i_placement!r}")
        if self.i_placement == "llm_delay":
            _log2(self.n_delay, "n_delay")


@dataclass
class PropLayout:
    """Placement for one connection's event-propagation routine."""

    encoding: str               # "dense" | "compressed" | "delayed"
    n_post: int
    i_base: int                 # vmem byte address (dense) or llm halfword base
    row_vectors: int            # packed row length in 64-byte vectors
    n_delay: int = 1
    t_addr: int = 0

    def __post_init__(self):
        if self.encoding not in ("dense", "compressed", "delayed"):
            raise ValueError(f"bad encoding {self.encoding!r}")
        if self.row_vectors <= 0:
            raise ValueError("row_vectors must be positive")
        if self.encoding == "delayed":
            _log2(self.n_delay, "n_delay")


@dataclass
class ScanLayout:
    """Spike-bitfield scan over one connection's source population."""

    bitfield_base: int          # scalar-memory byte address
    n_words: int                # bitfield words (ceil(n_pre/32))
    row_routine: str            # label of the propagation routine to dispatch
    stride_bytes: int           # uniform row stride
    weights: str = "vmem"       # "vmem" | "external"
    w_base: int = 0             # row-0 address in its space
    buf0: int = 0               # vmem DMA buffers (external weights only)
    buf1: int = 0
    row_bytes: int = 0          # bytes fetched per row (external weights only)

    def __post_init__(self):
        if self.weights not in ("vmem", "external"):
            raise ValueError(f"bad weight placement {self.weights!r}")
        if self.n_words <= 0:
            raise ValueError("empty bitfield")


# ---------------------------------------------------------------------------
# Neuron update (LIF)
# ---------------------------------------------------------------------------

def gen_lif_update(params: dict, layout: UpdateLayout,
                   tag: str = "lif") -> list[str]:
    """Inline block implementing one LIF update pass over a population.

    Per 32-neuron vector: V <- sat(mul_shift(alpha, V, 15) + I); spike
    mask = V >= Vth; V <- V - Vth where spiking; I <- 0; mask word stored
    to the scalar-memory bitfield.  ``params`` carries raw lane values
    {"alpha": s0_15, "v_thresh": s7_8}.
    """
    alpha = params["alpha"] & 0xFFFF
    vth = params["v_thresh"] & 0xFFFF
    lines = [f"# --- {tag}: LIF update, {layout.n} neurons ---",
             f"    vlui v1, {alpha}",
             f"    vlui v2, {vth}",
             "    vlui v3, 0"]
    nvec = _nvec(layout.n)
    if layout.i_placement == "llm_delay":
        nd = layout.n_delay
        lines += [f"    lw t4, {layout.t_addr}(x0)",
                  f"    andi t4, t4, {nd - 1}",
                  f"    addi t4, t4, {layout.i_base}"]
    lines += [f"    li t0, {layout.v_base}",
              f"    li t2, {layout.bitfield_base}"]
    if layout.i_placement == "vmem":
        lines.append(f"    li t1, {layout.i_base}")
    for k in range(nvec):
        kw = k % WINDOW_VECTORS
        if k and kw == 0:
            lines += [f"    addi t0, t0, {WINDOW_VECTORS * 64}",
                      f"    addi t2, t2, {WINDOW_VECTORS * 4}"]
            if layout.i_placement == "vmem":
                lines.append(f"    addi t1, t1, {WINDOW_VECTORS * 64}")
        lines.append(f"    vload.v v4, {kw * 64}(t0)")
        if layout.i_placement == "vmem":
            lines.append(f"    vload.v v5, {kw * 64}(t1)")
        elif layout.i_placement == "llm":
            lines.append(f"    vload.l v5, {layout.i_base + k}(v3)")
        else:
            lines += ["    vfill v7, t4",
                      "    vload.l v5, 0(v7)"]
        lines += ["    vmul.rz v4, v1, v4, 15",
                  "    vadd.s v4, v4, v5",
                  "    vtge t3, v4, v2",
                  "    vsub.s v6, v4, v2",
                  "    vsel v4, t3, v6",
                  f"    vstore.v v4, {kw * 64}(t0)"]
        if layout.i_placement == "vmem":
            lines.append(f"    vstore.v v3, {kw * 64}(t1)")
        elif layout.i_placement == "llm":
            lines.append(f"    vstore.l v3, {layout.i_base + k}(v3)")
        else:
            lines += ["    vstore.l v3, 0(v7)",
                      f"    addi t4, t4, {layout.n_delay}"]
        lines.append(f"    sw t3, {kw * 4}(t2)")
    return lines


# ---------------------------------------------------------------------------
# Event propagation
# ---------------------------------------------------------------------------

def _measure(lines: list[str], region: int | None, entering: bool) -> None:
    if region is not None:
        lines.append(f"    csrwi {hex(isa.CSR_PERF_REGION)}, "
                     f"{region if entering else 0}")


def gen_propagate_dense(layout: PropLayout, label: str,
                        measure_region: int | None = None) -> list[str]:
    """Subroutine: I[0:n_post] += row weights, saturating.  a0 = row base.

    Steady state is 4 instructions per vector: load weights, prefetch the
    next I vector, accumulate the current one, store.  The I prefetch runs
    one vector ahead so the accumulate never consumes a just-loaded value.
    """
    nvec = layout.row_vectors
    lines = [f"{label}:   # dense propagation, {nvec} vectors",
             f"    li t1, {layout.i_base}",
             "    vload.v v2, 0(t1)"]
    _measure(lines, measure_region, True)
    for j in range(nvec):
        jw = j % WINDOW_VECTORS
        if j and jw == 0:
            lines += [f"    addi a0, a0, {WINDOW_VECTORS * 64}",
                      f"    addi t1, t1, {WINDOW_VECTORS * 64}"]
        cur, nxt = ("v2", "v3") if j % 2 == 0 else ("v3", "v2")
        # The final prefetch has nothing left to fetch; wrap it to offset 0
        # (same base window) so the loop body stays homogeneous.
        pre_off = (jw + 1) * 64 if j + 1 < nvec else 0
        lines += [f"    vload.v v1, {jw * 64}(a0)",
                  f"    vload.v {nxt}, {pre_off}(t1)",
                  f"    vadd.s v4, v1, {cur}",
                  f"    vstore.v v4, {jw * 64}(t1)"]
    _measure(lines, measure_region, False)
    lines.append("    ret")
    return lines


def gen_propagate_compressed(layout: PropLayout, label: str,
                             measure_region: int | None = None) -> list[str]:
    """Subroutine: accumulate a packed (weight | local index) row into
    lane-local I.  a0 = row base.  6 instructions per vector."""
    log2nt = _log2(max(layout.n_post // NUM_LANES, 1), "N_target")
    nvec = layout.row_vectors
    lines = [f"{label}:   # compressed propagation, {nvec} vectors",
             f"    li t1, {layout.i_base}",
             "    vload.v v1, 0(a0)"]
    _measure(lines, measure_region, True)
    for j in range(nvec):
        jw = j % WINDOW_VECTORS
        if j and jw == 0:
            lines.append(f"    addi a0, a0, {WINDOW_VECTORS * 64}")
        cur, nxt = ("v1", "v2") if j % 2 == 0 else ("v2", "v1")
        pre_off = (jw + 1) * 64 if j + 1 < nvec else 0
        lines += [f"    vload.v {nxt}, {pre_off}(a0)",
                  f"    vandadd v3, {cur}, t1, {log2nt}",
                  "    vload.l v4, 0(v3)",
                  f"    vsri.rz v5, {cur}, {log2nt}",
                  "    vadd.s v4, v4, v5",
                  "    vstore.l v4, 0(v3)"]
    _measure(lines, measure_region, False)
    lines.append("    ret")
    return lines


def gen_propagate_delayed(layout: PropLayout, label: str,
                          measure_region: int | None = None) -> list[str]:
    """Subroutine: accumulate a packed (weight | delay) row into per-neuron
    circular delay buffers in lane-local memory.  a0 = row base.

    A spike processed at step t lands in slot (t + 1 + delay) mod N_delay,
    so a zero delay reproduces dense timing (consumed at step t + 1).
    7 instructions per vector; each vector's slot base (i_base + k*N_delay
    + (t+1) mod N_delay, before masking) lives in its own s-register for
    the first few vectors, then falls back to inline bumping.
    """
    nd = layout.n_delay
    log2nd = _log2(nd, "n_delay")
    nvec = layout.row_vectors
    npre = min(nvec, DELAYED_PRECOMP_VECTORS)
    lines = [f"{label}:   # delayed propagation, {nvec} vectors, N_delay {nd}",
             f"    lw t0, {layout.t_addr}(x0)",
             "    addi t0, t0, 1",
             "    vfill v6, t0",
             f"    li {_DELAYED_BASE_REGS[0]}, {layout.i_base}"]
    for k in range(1, npre):
        lines.append(f"    addi {_DELAYED_BASE_REGS[k]}, "
                     f"{_DELAYED_BASE_REGS[k - 1]}, {nd}")
    lines.append("    vload.v v1, 0(a0)")
    _measure(lines, measure_region, True)
    for j in range(nvec):
        jw = j % WINDOW_VECTORS
        if j and jw == 0:
            lines.append(f"    addi a0, a0, {WINDOW_VECTORS * 64}")
        cur, nxt = ("v1", "v2") if j % 2 == 0 else ("v2", "v1")
        pre_off = (jw + 1) * 64 if j + 1 < nvec else 0
        if j < npre:
            base = _DELAYED_BASE_REGS[j]
        else:
            base = _DELAYED_BASE_REGS[-1]
            lines.append(f"    addi {base}, {base}, {nd}")
        lines += [f"    vload.v {nxt}, {pre_off}(a0)",
                  f"    vadd v3, {cur}, v6",
                  f"    vandadd v3, v3, {base}, {log2nd}",
                  "    vload.l v4, 0(v3)",
                  f"    vsri.rz v5, {cur}, {log2nd}",
                  "    vadd.s v4, v4, v5",
                  "    vstore.l v4, 0(v3)"]
    _measure(lines, measure_region, False)
    lines.append("    ret")
    return lines


def gen_propagate(layout: PropLayout, label: str,
                  measure_region: int | None = None) -> list[str]:
    gen = {"dense": gen_propagate_dense,
           "compressed": gen_propagate_compressed,
           "delayed": gen_propagate_delayed}[layout.encoding]
    return gen(layout, label, measure_region)


# ---------------------------------------------------------------------------
# Spike scan
# ---------------------------------------------------------------------------

def gen_spike_scan(layout: ScanLayout, tag: str = "scan") -> list[str]:
    """Inline block: scan a spike bitfield and dispatch the row routine for
    every set bit, high bit first within each ascending word.

    With vmem-resident weights each spike costs the dispatch sequence plus
    the row routine.  With external weights the scan double-buffers: on
    finding a spike it waits for the previously issued fetch, starts the
    DMA for the new row into the other buffer, then processes the previous
    row while the new fetch is in flight.
    """
    l = layout
    shift = _log2(l.stride_bytes, "stride_bytes") if l.stride_bytes & (l.stride_bytes - 1) == 0 else None
    lines = [f"# --- {tag}: spike scan, {l.n_words} words ---",
             f"    li s0, {l.bitfield_base}"]
    external = l.weights == "external"
    if external:
        lines += [f"    li s6, {l.buf0}",   # idle buffer (next fetch target)
                  f"    li s7, {l.buf1}",   # other buffer
                  "    li s8, 0"]           # pending buffer: 0 = none yet
    for w in range(l.n_words):
        word_l = f"{tag}_w{w}"
        lines += [f"    lw s1, {w * 4}(s0)",
                  f"    beqz s1, {word_l}_end",
                  f"    li s2, {(w + 1) * 32}"]   # one past the top bit index
        lines += [f"{word_l}_loop:",
                  "    clz s3, s1",
                  "    sll s1, s1, s3",
                  "    slli s1, s1, 1",
                  "    sub s2, s2, s3",
                  "    addi s2, s2, -1"]          # s2 = source neuron id
        # Row address of this source.
        if shift is not None:
            lines.append(f"    slli s4, s2, {shift}")
        else:
            lines += [f"    li t0, {l.stride_bytes}",
                      "    mul s4, s2, t0"]
        if not external:
            lines += [f"    li t0, {l.w_base}",
                      "    add a0, s4, t0",
                      f"    jal ra, {l.row_routine}"]
        else:
            lines += [
                # Wait for the previous fetch so its buffer is coherent.
                f"{word_l}_wait:",
                f"    csrr t0, {hex(isa.CSR_DMA_STATUS)}",
                f"    bnez t0, {word_l}_wait",
                # Issue the fetch for this spike's row into the idle buffer.
                f"    li t0, {l.w_base}",
                "    add t0, s4, t0",
                f"    csrw {hex(isa.CSR_DMA_EXT_ADDR)}, t0",
                f"    csrw {hex(isa.CSR_DMA_LOCAL_ADDR)}, s6",
                f"    li t0, {l.row_bytes}",
                f"    csrw {hex(isa.CSR_DMA_BYTES)}, t0",
                f"    csrwi {hex(isa.CSR_DMA_CTRL)}, 1",
                # Process the previously fetched row, if any.  The routine
                # preserves s-registers, so the buffer bookkeeping survives.
                f"    beqz s8, {word_l}_swap",
                "    mv a0, s8",
                f"    jal ra, {l.row_routine}",
                f"{word_l}_swap:",
                # Pending becomes the buffer just fetched into; the other
                # buffer becomes the next fetch target.
                "    mv t2, s6",
                "    mv s6, s7",
                "    mv s7, t2",
                "    mv s8, t2",
            ]
        lines.append(f"    bnez s1, {word_l}_loop")
        lines.append(f"{word_l}_end:")
    if external:
        drain = f"{tag}_drain"
        lines += [f"    beqz s8, {drain}_end",
                  f"{drain}:",
                  f"    csrr t0, {hex(isa.CSR_DMA_STATUS)}",
                  f"    bnez t0, {drain}",
                  "    mv a0, s8",
                  f"    jal ra, {l.row_routine}",
                  f"{drain}_end:"]
    return lines


# ---------------------------------------------------------------------------
# Analytic cycle costs (must mirror the generated code exactly; verified
# against the simulator by the test suite)
# ---------------------------------------------------------------------------

BRANCH = 2  # taken-branch penalty of the pipeline model


def _li_cost(value: int) -> int:
    return 1 if -2048 <= value < 2048 else 2


def _window_bumps(nvec: int) -> int:
    return (nvec - 1) // WINDOW_VECTORS


def dense_row_cycles(layout: PropLayout) -> int:
    """Cycles of one dense-row subroutine call including its ret, excluding
    the caller's jal."""
    n = layout.row_vectors
    body = 4 * n + 2 * _window_bumps(n)
    prologue = _li_cost(layout.i_base) + 1      # li t1 + first prefetch
    return prologue + body + 1 + BRANCH          # + ret (taken)


def compressed_row_cycles(layout: PropLayout) -> int:
    n = layout.row_vectors
    body = 6 * n + _window_bumps(n)
    prologue = _li_cost(layout.i_base) + 1
    return prologue + body + 1 + BRANCH


def delayed_row_cycles(layout: PropLayout) -> int:
    n = layout.row_vectors
    npre = min(n, DELAYED_PRECOMP_VECTORS)
    body = 7 * n + _window_bumps(n) + max(0, n - npre)
    # lw/addi/vfill + li base0 + addi chain + first prefetch; the lw feeds
    # the addi immediately, costing one load-use stall.
    prologue = 3 + _li_cost(layout.i_base) + (npre - 1) + 1 + 1
    return prologue + body + 1 + BRANCH


def row_cycles(layout: PropLayout) -> int:
    return {"dense": dense_row_cycles,
            "compressed": compressed_row_cycles,
            "delayed": delayed_row_cycles}[layout.encoding](layout)


def update_cycles(layout: UpdateLayout) -> int:
    """Cycles of one inline LIF-update block."""
    nvec = _nvec(layout.n)
    per = {"vmem": 10, "llm": 10, "llm_delay": 12}[layout.i_placement]
    bumps = _window_bumps(nvec) * (3 if layout.i_placement == "vmem" else 2)
    pro = 3 + _li_cost(layout.v_base) + _li_cost(layout.bitfield_base)
    if layout.i_placement == "vmem":
        pro += _li_cost(layout.i_base)
    elif layout.i_placement == "llm_delay":
        pro += 3 + 1   # lw/andi/addi with one load-use stall on the lw
    return pro + per * nvec + bumps
