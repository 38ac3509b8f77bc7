#!/usr/bin/env python3
"""Regenerate the tuned benchmark fixture file.

For each (network size, sparsity) pair the Poisson source rate is bisected
until the host-model network rate meets the target.  The result is written
to src/fennsim/fixtures/va_tuned.json along with the tuning settings that
produced it, so the provenance of every value is recorded in the file.
"""

import json
import sys
import time
from dataclasses import asdict, replace
from pathlib import Path

from fennsim import bench

SIZES = [512, 1024, 2048, 2560, 4096, 8192, 10000]
SPARSITIES = [0.9]
TARGET_RATE = 0.01
T, WARMUP = 400, 100

def main() -> int:
    out = {"provenance": {
        "generator": "scripts/tune_va.py",
        "method": "bisection of Poisson source rate on the host-model "
                  "fixed-point LIF dynamics",
        "target_rate": TARGET_RATE, "tune_steps": T, "tune_warmup": WARMUP,
    }, "tuned": {}}
    for n in SIZES:
        for sp in SPARSITIES:
            spec = bench.VaSpec(n, sparsity=sp)
            t0 = time.time()
            nu = bench.tune_input_rate(spec, TARGET_RATE, T, WARMUP)
            params = bench.VaParams(input_rate=nu)
            rate = bench._host_rate(spec, params, T, WARMUP)
            key = bench._fixture_key(spec)
            out["tuned"][key] = asdict(params)
            print(f"{key}: input_rate={nu:.6f} host rate={rate:.5f} "
                  f"({time.time() - t0:.1f} s)", flush=True)
    path = Path(__file__).resolve().parents[1] / "src" / "fennsim" / \
        "fixtures" / "va_tuned.json"
    path.write_text(json.dumps(out, indent=2) + "\n")
    print(f"wrote {path}")
    return 0

if __name__ == "__main__":
    sys.exit(main())
