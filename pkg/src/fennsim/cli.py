"""Command-line surface.

Subcommands: ``asm``, ``dis``, ``run``, ``net run``, ``oracle compare``,
``bench va``, ``fit perf``.  Exit codes: 0 ok, 1 verification mismatch,
2 usage error, 3 simulation trap.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from . import bench, golden, net
from .asm import Assembler, AsmError, ProgramImage, disassemble
from .net import ModelError
from .sim import MemConfig, SimTrap, run_image

EXIT_OK = 0
EXIT_MISMATCH = 1
EXIT_USAGE = 2
EXIT_TRAP = 3

_SPACE_NAMES = {0: "imem", 1: "dmem", 2: "vmem", 3: "llm"}


def cmd_asm(args) -> int:
    src = Path(args.source).read_text()
    img = Assembler().assemble(src)
    out = Path(args.output or Path(args.source).with_suffix(".fenn"))
    out.write_bytes(img.to_bytes())
    total = sum(len(s.data) for s in img.sections)
    print(f"{out}: {len(img.sections)} sections, {total} bytes")
    return EXIT_OK


def cmd_dis(args) -> int:
    img = ProgramImage.from_bytes(Path(args.image).read_bytes())
    for s in img.sections:
        name = _SPACE_NAMES.get(s.space, str(s.space))
        print(f"# section {name} base=0x{s.base:x} ({len(s.data)} bytes)")
        if s.space == 0:
            labels = {addr: sym for sym, (space, addr) in img.symbols.items()
                      if space == 0}
            for off in range(0, len(s.data), 4):
                addr = s.base + off
                word = int.from_bytes(s.data[off:off + 4], "little")
                if addr in labels:
                    print(f"{labels[addr]}:")
                print(f"    {addr:08x}:  {word:08x}  {disassemble(word)}")
        else:
            for off in range(0, len(s.data), 16):
                chunk = s.data[off:off + 16]
                print(f"    {s.base + off:08x}:  {chunk.hex()}")
    return EXIT_OK


def cmd_run(args) -> int:
    img = ProgramImage.from_bytes(Path(args.image).read_bytes())
    trace = open(args.trace, "w") if args.trace else None
    try:
        info, machine = run_image(img, MemConfig(),
                                  max_cycles=args.max_cycles, trace=trace)
    finally:
        if trace:
            trace.close()
    if info.timed_out:
        print(f"timed out after {args.max_cycles} cycles", file=sys.stderr)
        return EXIT_TRAP
    print(f"exit code {info.exit_code}: {info.cycles} cycles, "
          f"{info.instret} instructions")
    for region in sorted(info.region_cycles):
        print(f"  region {region}: {info.region_cycles[region]} cycles")
    if args.dump:
        dump = machine.dump_image()
        Path(args.dump).write_bytes(dump.to_bytes())
        print(f"memory image written to {args.dump}")
    return EXIT_OK if info.exit_code == 0 else EXIT_TRAP


def _load_inputs(model: net.Model, specs: list[str], T: int) -> dict:
    inputs = {}
    for spec in specs:
        name, _, path = spec.partition("=")
        if not path:
            raise ModelError(
                f"--input needs name=file.fspk or name=file.txt, got {spec!r}")
        if name not in model.inputs:
            raise ModelError(f"unknown input container {name!r}")
        shape = model.inputs[name].shape
        if path.endswith(".fspk"):
            raster, fshape = net.read_fspk(path)
            if fshape != shape:
                raise ModelError(f"{path}: shape {fshape} != container "
                                 f"shape {shape}")
            if raster.shape[0] < T:
                raise ModelError(f"{path}: only {raster.shape[0]} timesteps, "
                                 f"need {T}")
            raster = raster[:T]
        else:
            raster = net.events_to_raster(net.read_event_list(path), shape, T)
        inputs[name] = raster
    return inputs


def cmd_net_run(args) -> int:
    model = net.load_model(args.model)
    elab = net.elaborate(model, seed=args.seed)
    T = args.steps
    inputs = _load_inputs(model, args.input, T)
    record = [tuple(r.split(".", 1)) for r in args.record]
    out = net.run(elab, inputs, T, record=record)
    total = sum(int(np.bitwise_count(r).sum()) for r in out.spikes.values())
    print(f"{T} steps: {out.cycles} cycles, {total} spikes, {out.sops} SOPs")
    for region in sorted(out.region_cycles):
        print(f"  region {region}: {out.region_cycles[region]} cycles")
    outdir = Path(args.out_dir)
    outdir.mkdir(parents=True, exist_ok=True)
    for pname, raster in out.spikes.items():
        p = outdir / f"{pname}.fspk"
        net.write_fspk(p, raster, model.populations[pname].shape)
        print(f"  wrote {p}")
    for (pname, vname), values in out.recorded.items():
        p = outdir / f"{pname}.{vname}.npy"
        np.save(p, values)
        print(f"  wrote {p}")
    return EXIT_OK


def cmd_oracle_compare(args) -> int:
    model = net.load_model(args.model)
    T = args.steps
    inputs = _load_inputs(model, args.input, T)
    elab = net.elaborate(model, seed=args.seed)
    record = [(p, v) for p in model.populations
              for v in model.populations[p].variables]
    out = net.run(elab, inputs, T, record=record)
    g = golden.GoldenEngine(model, seed=args.seed)
    gout = g.run(inputs, T, record=record)
    ok = True
    for pname in model.populations:
        if not np.array_equal(out.spikes[pname], gout.spikes[pname]):
            print(f"MISMATCH: spike raster of {pname}")
            ok = False
    for key in record:
        if not np.array_equal(out.recorded[key], gout.recorded[key]):
            print(f"MISMATCH: variable {key[0]}.{key[1]}")
            ok = False
    if out.cycles != gout.cycles:
        print(f"MISMATCH: cycles sim={out.cycles} golden={gout.cycles}")
        ok = False
    if ok:
        print(f"OK: simulator matches golden model bit-for-bit over {T} "
              f"steps ({out.cycles} cycles)")
        return EXIT_OK
    return EXIT_MISMATCH


def cmd_bench_va(args) -> int:
    spec = bench.VaSpec(args.neurons, sparsity=args.sparsity,
                        encoding=args.encoding, T=args.steps, seed=args.seed)
    report = bench.run_va(spec, engine=args.engine)
    if args.csv:
        new = not Path(args.csv).exists()
        with open(args.csv, "a", newline="") as f:
            w = csv.DictWriter(f, fieldnames=list(report))
            if new:
                w.writeheader()
            w.writerow(report)
    print(json.dumps(report, indent=2))
    return EXIT_OK


def cmd_fit_perf(args) -> int:
    points = []
    with open(args.csv) as f:
        for row in csv.DictReader(f):
            points.append((int(row["n_neurons"]), int(row["timesteps"]),
                           int(row["sops"]), int(row["cycles"])))
    fit = bench.fit_perfmodel(points)
    print(json.dumps({k: fit[k] for k in ("c_neuron", "c_sop", "r2")},
                     indent=2))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="fennsim",
        description="Assembler, simulator and SNN benchmark harness for a "
                    "32-lane fixed-point vector accelerator")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("asm", help="assemble a source file to a FENN image")
    p.add_argument("source")
    p.add_argument("-o", "--output")
    p.set_defaults(fn=cmd_asm)

    p = sub.add_parser("dis", help="disassemble a FENN image")
    p.add_argument("image")
    p.set_defaults(fn=cmd_dis)

    p = sub.add_parser("run", help="run a FENN image on the simulator")
    p.add_argument("image")
    p.add_argument("--max-cycles", type=int, default=10_000_000)
    p.add_argument("--trace", help="write an instruction trace to this file")
    p.add_argument("--dump", help="write final memory image to this file")
    p.set_defaults(fn=cmd_run)

    p = sub.add_parser("net", help="network simulation")
    netsub = p.add_subparsers(dest="net_command", required=True)
    pr = netsub.add_parser("run", help="run a network description file")
    pr.add_argument("--model", required=True)
    pr.add_argument("--steps", type=int, required=True)
    pr.add_argument("--record", action="append", default=[],
                    metavar="POP.VAR")
    pr.add_argument("--input", action="append", default=[],
                    metavar="NAME=FILE", help="spike input (.fspk or text "
                    "event list)")
    pr.add_argument("--seed", type=int, default=0)
    pr.add_argument("--out-dir", default="out")
    pr.set_defaults(fn=cmd_net_run)

    p = sub.add_parser("oracle", help="reference oracles")
    osub = p.add_subparsers(dest="oracle_command", required=True)
    pc = osub.add_parser("compare",
                         help="run simulator vs bit-exact golden model")
    pc.add_argument("--model", required=True)
    pc.add_argument("--steps", type=int, required=True)
    pc.add_argument("--input", action="append", default=[],
                    metavar="NAME=FILE")
    pc.add_argument("--seed", type=int, default=0)
    pc.set_defaults(fn=cmd_oracle_compare)

    p = sub.add_parser("bench", help="benchmarks")
    bsub = p.add_subparsers(dest="bench_command", required=True)
    pb = bsub.add_parser("va", help="balanced random network benchmark")
    pb.add_argument("--neurons", type=int, required=True)
    pb.add_argument("--sparsity", type=float, default=0.9)
    pb.add_argument("--encoding", default="dense",
                    choices=("dense", "compressed", "delayed"))
    pb.add_argument("--steps", type=int, default=1000)
    pb.add_argument("--seed", type=int, default=1234)
    pb.add_argument("--engine", default="golden", choices=("golden", "sim"))
    pb.add_argument("--csv", help="append the report to this CSV file")
    pb.set_defaults(fn=cmd_bench_va)

    p = sub.add_parser("fit", help="model fitting")
    fsub = p.add_subparsers(dest="fit_command", required=True)
    pf = fsub.add_parser("perf", help="fit the performance model to a "
                         "benchmark sweep CSV")
    pf.add_argument("csv")
    pf.set_defaults(fn=cmd_fit_perf)
    return ap


def main(argv: list[str] | None = None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as e:
        return EXIT_USAGE if e.code not in (0, None) else EXIT_OK
    try:
        return args.fn(args)
    except (AsmError, ModelError, bench.FitError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except SimTrap as e:
        print(f"trap: {e}", file=sys.stderr)
        return EXIT_TRAP
    except FileNotFoundError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
