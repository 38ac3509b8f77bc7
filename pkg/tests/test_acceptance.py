"""Acceptance gate: one test per criterion, each printing a single
PASS/FAIL line with its measured quantities and stated tolerances."""

import random
import time

import numpy as np
import pytest
from conftest import SCALAR_MNEMONICS, program, random_instr, random_program

from fennsim import bench, dslc, fxp, golden, isa, kernels, net
from fennsim.asm import Assembler
from fennsim.fxp import QFormat, RoundMode
from fennsim.net import Connection, Model, lif_population
from fennsim.prng import LaneRng
from fennsim.sim import (DEFAULT_CYCLES, CycleModel, Machine, MemConfig,
                         PipelinedCore, run_image)

S7_8 = QFormat(8)


def report(n: int, ok: bool, detail: str) -> None:
    print(f"\nCRITERION {n} {'PASS' if ok else 'FAIL'}: {detail}")
    assert ok


# ---------------------------------------------------------------------------
# 1. ISA roundtrip
# ---------------------------------------------------------------------------

def test_criterion_1_isa_roundtrip():
    t0 = time.perf_counter()
    r = random.Random(20260823)
    failures = 0
    per_mnemonic = 10_000
    for mn in sorted(isa.VECTOR_MNEMONICS):
        for _ in range(per_mnemonic):
            i = random_instr(mn, r)
            if isa.decode(isa.encode(i)) != i:
                failures += 1
    # The scalar subset gets the same treatment at a lighter count.
    for mn in SCALAR_MNEMONICS:
        for _ in range(1000):
            i = random_instr(mn, r)
            if isa.decode(isa.encode(i)) != i:
                failures += 1
    dt = time.perf_counter() - t0
    ok = failures == 0 and dt < 10.0
    report(1, ok, f"decode(encode(i)) == i for {len(isa.VECTOR_MNEMONICS)} "
                  f"vector mnemonics x {per_mnemonic} random field "
                  f"combinations (+{len(SCALAR_MNEMONICS)} scalar x 1000); "
                  f"{failures} failures; runtime {dt:.1f}s (limit 10s)")


# ---------------------------------------------------------------------------
# 2. Fixed-point oracle equivalence
# ---------------------------------------------------------------------------

def test_criterion_2_fixed_point_oracles():
    rng = np.random.default_rng(2)
    mism = 0

    # sat_add / sat_sub over 10^6 random pairs vs a wide-integer oracle.
    a = rng.integers(-32768, 32768, 1_000_000)
    b = rng.integers(-32768, 32768, 1_000_000)
    mism += int((fxp.sat_add(a, b) != np.clip(a + b, -32768, 32767)).sum())
    mism += int((fxp.sat_sub(a, b) != np.clip(a - b, -32768, 32767)).sum())

    # shift_right_round exhaustive: all 2^16 inputs x 16 shifts x 2 modes.
    x = np.arange(-32768, 32768, dtype=np.int64)
    for shift in range(16):
        want_rz = x >> shift
        got_rz = fxp.shift_right_round(x, shift, RoundMode.TO_ZERO)
        mism += int((got_rz != fxp.wrap16(want_rz)).sum())
        half = (1 << (shift - 1)) if shift else 0
        want_rn = (x + half) >> shift
        got_rn = fxp.shift_right_round(x, shift, RoundMode.TO_NEAREST)
        mism += int((got_rn != fxp.wrap16(want_rn)).sum())

    # Stochastic rounding unbiased within 0.01 ULP over 10^5 draws.
    shift = 6
    value = 1234          # 1234 / 64 = 19.28125: a non-trivial fraction
    draws = rng.integers(0, 1 << 16, 100_000)
    got = fxp.shift_right_round(np.full(100_000, value), shift,
                                RoundMode.STOCHASTIC, draws)
    bias = abs(got.mean() - value / (1 << shift))
    ok = mism == 0 and bias < 0.01
    report(2, ok, f"sat ops 2x10^6 pairs + shift_right_round exhaustive "
                  f"2^16 x 16 shifts x 2 modes: {mism} mismatches; "
                  f"stochastic bias {bias:.4f} ULP (limit 0.01)")


# ---------------------------------------------------------------------------
# 3. Pipeline differential test
# ---------------------------------------------------------------------------

def test_criterion_3_pipeline_differential():
    t0 = time.perf_counter()
    r = random.Random(33)
    bad = 0
    n_programs = 1000
    for _ in range(n_programs):
        img = random_program(r, max_instrs=500)
        ip, mp = run_image(img, engine="pipelined")
        ir, mr = run_image(img, engine="reference")
        same = (mp.x == mr.x and np.array_equal(mp.v, mr.v)
                and mp.dmem == mr.dmem and np.array_equal(mp.vmem, mr.vmem)
                and np.array_equal(mp.llm, mr.llm)
                and ip.exit_code == ir.exit_code
                and ip.instret == ir.instret)
        bad += not same

    # Load-use pairs cost exactly +1 cycle, for every scalar load flavour.
    stall_ok = True
    for load in ("lw", "lh", "lhu", "lb", "lbu"):
        dep = program([f"    {load} t0, 0(x0)", "    addi t1, t0, 1",
                       "    li a0, 0", "    ecall"])
        ind = program([f"    {load} t0, 0(x0)", "    addi t1, t2, 1",
                       "    li a0, 0", "    ecall"])
        cd, _ = run_image(Assembler().assemble(dep))
        ci, _ = run_image(Assembler().assemble(ind))
        stall_ok &= cd.cycles == ci.cycles + 1
    dt = time.perf_counter() - t0
    ok = bad == 0 and stall_ok
    report(3, ok, f"{n_programs} random programs (<=500 instructions): "
                  f"{bad} architectural-state mismatches between pipelined "
                  f"and reference engines; load-use +1 cycle "
                  f"{'verified' if stall_ok else 'VIOLATED'} for all load "
                  f"flavours; runtime {dt:.0f}s")


# ---------------------------------------------------------------------------
# 4. Kernel throughput reproduction
# ---------------------------------------------------------------------------

def test_criterion_4_kernel_throughput():
    t0 = time.perf_counter()
    f_hz = 175e6
    want = {"dense": 4, "compressed": 6, "delayed": 7}
    got = {}
    for enc, per in want.items():
        nvec = 16 if enc != "delayed" else 10
        n_post = nvec * 32 if enc == "dense" else 1024
        layout = kernels.PropLayout(
            encoding=enc, n_post=n_post,
            i_base=4096 if enc == "dense" else 0, row_vectors=nvec,
            n_delay=4 if enc == "delayed" else 1)
        routine = kernels.gen_propagate(layout, "row", measure_region=3)
        src = program(["    li a0, 65536", "    jal ra, row",
                       "    li a0, 0", "    ecall"] + routine)
        img = Assembler().assemble(src)
        m = Machine()
        m.load_image(img)
        info = PipelinedCore(m).run()
        # The closing CSR write is charged to the measured region.
        body = info.region_cycles[3] - 1
        got[enc] = body / nvec
    rates = {enc: f_hz * 32 / got[enc] / 1e9 for enc in want}
    effective75 = rates["compressed"] * 4      # x4 compression at 75% sparsity
    cycles_ok = all(got[e] == want[e] for e in want)
    rates_ok = (abs(rates["dense"] - 1.400) < 5e-4
                and abs(rates["compressed"] - 0.933) < 5e-4
                and abs(rates["delayed"] - 0.800) < 5e-4
                and abs(effective75 - 3.73) < 5e-3)
    dt = time.perf_counter() - t0
    ok = cycles_ok and rates_ok and dt < 60.0
    report(4, ok, f"measured steady-state cycles/vector "
                  f"{got['dense']:.0f}/{got['compressed']:.0f}/"
                  f"{got['delayed']:.0f} (want 4/6/7, 0% tolerance) -> "
                  f"{rates['dense']:.3f}/{rates['compressed']:.3f}/"
                  f"{rates['delayed']:.3f} GSOP/s at 175 MHz, "
                  f"{effective75:.2f} effective at 75% sparsity; "
                  f"runtime {dt:.1f}s (limit 60s)")


# ---------------------------------------------------------------------------
# 5. DMA latency hiding
# ---------------------------------------------------------------------------

def test_criterion_5_dma_latency_hiding():
    n_pre, n_post, T = 64, 2048, 20
    r = np.random.default_rng(5)
    m = Model("dma")
    m.add_input("in", n_pre)
    m.add_population(lif_population("p", n_post, tau=20.0, v_thresh=50.0))
    w = r.integers(1, 20, (n_pre, n_post)).astype(np.int16)
    m.connect(Connection("in", "p", "dense", w, raw=True,
                         placement="external"))
    raster = np.full((T, 2), 0xFFFFFFFF, dtype=np.uint32)   # all 64 fire
    inputs = {"in": raster}

    prop = golden.GoldenEngine(m, seed=0).run(inputs, T).region_cycles[1]
    zero_lat = CycleModel(dma_latency=0, dma_cycles_per_vector=0)
    compute = golden.GoldenEngine(m, seed=0, timing=zero_lat) \
        .run(inputs, T).region_cycles[1]

    row_bytes = 2 * n_post
    first_fetch = DEFAULT_CYCLES.dma_latency + \
        2 * ((row_bytes + 63) // 64)     # one unhidden fetch per timestep
    excess = prop - compute - T * first_fetch
    frac = excess / compute
    ok = frac < 0.02
    report(5, ok, f"external rows of {n_post} synapses: propagation "
                  f"{prop} cycles vs pure compute {compute}; excess beyond "
                  f"one unhidden fetch/step ({first_fetch} cycles) is "
                  f"{100 * frac:.2f}% (limit 2%)")


# ---------------------------------------------------------------------------
# 6. Propagation correctness
# ---------------------------------------------------------------------------

def _random_net(r, encoding, sparsity, recurrent, delays_max=0,
                w_range=(-60, 80), v_init_max=256, max_vectors=16):
    n_pre = int(r.integers(1, max_vectors + 1)) * 32
    n_post = int(r.integers(1, max_vectors + 1)) * 32
    m = Model("rand")
    m.add_input("in", n_pre)
    m.add_population(lif_population(
        "p", n_post, tau=float(r.uniform(5, 40)), v_thresh=1.0,
        v_init=lambda rr, shape: rr.integers(0, v_init_max, shape)))
    def block(rows):
        w = r.integers(*w_range, (rows, n_post)).astype(np.int16)
        w[r.random((rows, n_post)) < sparsity] = 0
        d = None
        if encoding == "delayed":
            d = (r.integers(0, delays_max + 1, (rows, n_post))
                 if delays_max else np.zeros((rows, n_post), dtype=np.int64))
        return w, d
    w, d = block(n_pre)
    m.connect(Connection("in", "p", encoding, w, raw=True, delays=d))
    if recurrent:
        w, d = block(n_post)
        m.connect(Connection("p", "p", encoding, w, raw=True, delays=d))
    return m, n_pre


def _drive(r, n_pre, T, p=0.08):
    bits = r.random((T, n_pre)) < p
    return np.packbits(bits, axis=1, bitorder="little").view(np.uint32).copy()


def test_criterion_6_propagation_correctness():
    t0 = time.perf_counter()
    sparsities = (0.0, 0.5, 0.75, 0.9, 0.99)
    n_networks = 200
    mismatches = 0
    r = np.random.default_rng(66)
    for k in range(n_networks):
        sparsity = sparsities[k % len(sparsities)]
        recurrent = bool(k % 3 == 0)
        T = 3
        for encoding in ("dense", "compressed", "delayed"):
            m, n_pre = _random_net(r, encoding, sparsity, recurrent)
            inputs = {"in": _drive(r, n_pre, T)}
            record = [("p", "V")]
            if encoding != "delayed":
                record.append(("p", "I"))
            out = net.run(net.elaborate(m, seed=k), inputs, T, record=record)
            gout = golden.GoldenEngine(m, seed=k).run(inputs, T,
                                                      record=record)
            same = np.array_equal(out.spikes["p"], gout.spikes["p"]) and \
                all(np.array_equal(out.recorded[key], gout.recorded[key])
                    for key in record)
            mismatches += not same

    # Delayed networks with random delays vs the explicit-queue oracle.
    queue_bad = 0
    T = 200
    for k in range(n_networks):
        # Moderate weights and sizes keep recurrent firing rates (and host
        # runtime) sane over the long horizon; delay coverage is what
        # matters here, and the size sweep is already covered above.
        m, n_pre = _random_net(r, "delayed", sparsities[k % 5],
                               recurrent=bool(k % 2), delays_max=7,
                               w_range=(-14, 16), v_init_max=128,
                               max_vectors=8)
        inputs = {"in": _drive(r, n_pre, T)}
        gout = golden.GoldenEngine(m, seed=k).run(inputs, T)
        q = golden.queue_oracle_run(m, inputs, T, seed=k)
        queue_bad += not np.array_equal(gout.spikes["p"], q["p"])
    dt = time.perf_counter() - t0
    ok = mismatches == 0 and queue_bad == 0 and dt < 300.0
    report(6, ok, f"{n_networks} random networks x 3 encodings vs golden "
                  f"oracle: {mismatches} mismatches; {n_networks} random-"
                  f"delay networks vs queue oracle over {T} steps: "
                  f"{queue_bad} mismatches; runtime {dt:.0f}s (limit 300s)")


# ---------------------------------------------------------------------------
# 7. DSL compiler vs hand-written kernel
# ---------------------------------------------------------------------------

def test_criterion_7_dsl_compiler():
    n = 10016          # 313 vectors: 10^4 random states in one pass
    rng = np.random.default_rng(7)
    V = rng.integers(-4000, 4000, n).astype(np.int16)
    I = rng.integers(-1000, 1000, n).astype(np.int16)
    params = {"alpha": 31170, "v_thresh": 256}
    nvec = n // 32

    def run_lines(lines):
        img = Assembler().assemble(program(lines + ["    li a0, 0",
                                                    "    ecall"]))
        m = Machine()
        m.load_image(img)
        m.vmem[:n] = V
        m.vmem[65536 // 2:65536 // 2 + n] = I
        info = PipelinedCore(m).run()
        assert info.exit_code == 0
        return (m.vmem[:n].copy(), m.vmem[65536 // 2:65536 // 2 + n].copy(),
                bytes(m.dmem[1024:1024 + 4 * nvec]))

    hand = kernels.gen_lif_update(params, kernels.UpdateLayout(
        n=n, v_base=0, i_base=65536, bitfield_base=1024))

    src = dslc.KernelSource(
        code=("V = ((Alpha * V) + I);\nI = 0;\n"
              "if (V >= VThresh) {\n    Spike();\n    V = V - VThresh;\n}\n"),
        params={"Alpha": (float(np.exp(-1 / 20.0)), QFormat(15)),
                "VThresh": (1.0, S7_8)},
        vars={"V": S7_8, "I": S7_8}, events=("Spike",))
    compiled = dslc.compile_kernel(src, dslc.KernelLayout(
        n=n, vars={"V": dslc.VarLayout("vmem", 0),
                   "I": dslc.VarLayout("vmem", 65536)},
        events={"Spike": 1024}))

    same = all(np.array_equal(a, b)
               for a, b in zip(run_lines(hand), run_lines(compiled)))

    # Masked if/else sentinel: lanes outside the condition keep their value.
    sent_src = dslc.KernelSource(
        code="if (V >= Thr) {\n    S = Flag;\n}\n",
        params={"Thr": (0.5, S7_8), "Flag": (1.0, S7_8)},
        vars={"V": S7_8, "S": S7_8})
    sv = rng.integers(-256, 512, 96)
    sentinel = np.full(96, -21555)
    out = dslc.Interpreter(sent_src).run({"V": sv, "S": sentinel.copy()})
    inactive = sv < 128
    sentinel_ok = (out["S"][inactive] == -21555).all() and \
        (out["S"][~inactive] == 256).all()
    ok = same and sentinel_ok
    report(7, ok, f"compiled LIF kernel bit-identical to hand-written "
                  f"kernel over {n} random states: {same}; masked if/else "
                  f"leaves inactive lanes untouched: {sentinel_ok}")


# ---------------------------------------------------------------------------
# 8. VA benchmark at desk scale
# ---------------------------------------------------------------------------

def test_criterion_8_va_benchmark():
    t0 = time.perf_counter()
    params = bench.tuned_params(bench.VaSpec(2560, sparsity=0.9))
    dense = bench.run_va(bench.VaSpec(2560, encoding="dense"), params)
    comp = bench.run_va(bench.VaSpec(2560, encoding="compressed"), params)
    ratio = comp["effective_gsops"] / dense["effective_gsops"]

    r = np.random.default_rng(42)
    big = bench._bernoulli_raw(r, 2048, 16000, 0.1, 10)
    padding = net.build_compressed_rows(big, raw=True).padding_fraction

    big_dense = bench.run_va(bench.VaSpec(10000, encoding="dense"),
                             bench.tuned_params(bench.VaSpec(10000)))
    modeled = big_dense["modeled_seconds"]

    points = []
    for n in (1024, 2048, 4096, 8192):
        rep = bench.run_va(bench.VaSpec(n, T=200),
                           bench.tuned_params(bench.VaSpec(n)))
        points.append((n, 200, rep["sops"], rep["cycles"]))
    fit = bench.fit_perfmodel(points)
    dt = time.perf_counter() - t0
    ok = (2.0 <= ratio <= 3.5 and 0.35 <= padding <= 0.55
          and modeled <= 1.5 and fit["r2"] > 0.95 and dt < 900.0)
    report(8, ok, f"2560/90% compressed-vs-dense effective throughput ratio "
                  f"{ratio:.2f} (window [2.0, 3.5]); 16000-target padding "
                  f"fraction {padding:.2f} (window [0.35, 0.55]); 10000-"
                  f"neuron dense 1000 steps modeled {modeled:.2f}s "
                  f"(limit 1.5s); perf-model fit R^2={fit['r2']:.4f} "
                  f"(limit 0.95); runtime {dt:.0f}s (limit 900s)")


# ---------------------------------------------------------------------------
# 9. Dataset-shaped topology equivalence (stands in for SHD / N-MNIST
#    accuracy reproduction, which needs trained weights and datasets)
# ---------------------------------------------------------------------------

def test_criterion_9_dataset_shaped_topologies():
    r = np.random.default_rng(9)

    # SHD-shaped: 700 inputs -> 256 recurrent neurons, delays 0..62,
    # N_delay = 64.
    m = Model("shd")
    m.add_input("in", 700)
    m.add_population(lif_population(
        "p", 256, tau=20.0, v_thresh=1.0,
        v_init=lambda rr, shape: rr.integers(0, 256, shape)))
    for src_name, rows in (("in", 700), ("p", 256)):
        w = r.integers(-30, 40, (rows, 256)).astype(np.int16)
        w[r.random((rows, 256)) < 0.8] = 0
        d = r.integers(0, 63, (rows, 256))
        m.connect(Connection(src_name, "p", "delayed", w, raw=True,
                             delays=d, n_delay=64))
    T = 200
    inputs = {"in": _drive(r, 700, T, p=0.05)}
    gout = golden.GoldenEngine(m, seed=0).run(inputs, T)
    q = golden.queue_oracle_run(m, inputs, T, seed=0)
    shd_queue_ok = np.array_equal(gout.spikes["p"], q["p"])
    T_sim = 10
    sim_out = net.run(net.elaborate(m, seed=0),
                      {"in": inputs["in"][:T_sim]}, T_sim)
    g_short = golden.GoldenEngine(m, seed=0).run(
        {"in": inputs["in"][:T_sim]}, T_sim)
    shd_sim_ok = np.array_equal(sim_out.spikes["p"], g_short.spikes["p"]) \
        and sim_out.cycles == g_short.cycles

    # N-MNIST-shaped: 512 recurrent neurons at 99% sparsity, compressed
    # encoding bit-identical to dense.
    m2d, m2c = Model("nmnist_d"), Model("nmnist_c")
    w_in = r.integers(-30, 40, (1024, 512)).astype(np.int16)
    w_in[r.random((1024, 512)) < 0.99] = 0
    w_rec = r.integers(-30, 40, (512, 512)).astype(np.int16)
    w_rec[r.random((512, 512)) < 0.99] = 0
    for m2, enc in ((m2d, "dense"), (m2c, "compressed")):
        m2.add_input("in", 1024)
        m2.add_population(lif_population(
            "p", 512, tau=20.0, v_thresh=1.0,
            v_init=lambda rr, shape: rr.integers(0, 256, shape)))
        m2.connect(Connection("in", "p", enc, w_in, raw=True))
        m2.connect(Connection("p", "p", enc, w_rec, raw=True))
    T2 = 100
    inputs2 = {"in": _drive(r, 1024, T2, p=0.05)}
    gd = golden.GoldenEngine(m2d, seed=1).run(inputs2, T2)
    gc = golden.GoldenEngine(m2c, seed=1).run(inputs2, T2)
    nmnist_enc_ok = np.array_equal(gd.spikes["p"], gc.spikes["p"])
    sim2 = net.run(net.elaborate(m2c, seed=1),
                   {"in": inputs2["in"][:T_sim]}, T_sim)
    g2 = golden.GoldenEngine(m2c, seed=1).run({"in": inputs2["in"][:T_sim]},
                                              T_sim)
    nmnist_sim_ok = np.array_equal(sim2.spikes["p"], g2.spikes["p"]) \
        and sim2.cycles == g2.cycles

    ok = shd_queue_ok and shd_sim_ok and nmnist_enc_ok and nmnist_sim_ok
    report(9, ok, "SHD/N-MNIST accuracies need trained weights and datasets "
                  "(not reproducible at desk scale); substituted topology "
                  f"equivalence: SHD-shaped (256 recurrent, delays 0-62, "
                  f"N_delay=64) queue-oracle {shd_queue_ok}, simulator "
                  f"{shd_sim_ok}; N-MNIST-shaped (512 recurrent, 99% sparse) "
                  f"dense==compressed {nmnist_enc_ok}, simulator "
                  f"{nmnist_sim_ok}")
