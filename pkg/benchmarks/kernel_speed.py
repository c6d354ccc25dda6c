"""Timing comparison of the numba kernels against the pure-numpy fallback.

Runs the hot paths (nonequispaced forward/adjoint, lattice bucketing,
residues, test-function sampling) in a subprocess per backend so the
environment flag ANOVAFOURIER_PURE_NUMPY takes effect at import time.

Usage:  python benchmarks/kernel_speed.py [--nodes 50000] [--repeats 3]
"""

from __future__ import annotations

import argparse
import json
import os
import subprocess
import sys

WORKER = r"""
import json, time
import numpy as np
from anovafourier import _kernels
from anovafourier.anova import term_family_ds
from anovafourier.index_sets import grouped
from anovafourier.method import build_search_sets
from anovafourier.operator import BlockFourierOperator, uniform_nodes

cfg = json.loads({cfg!r})
m, repeats = cfg["nodes"], cfg["repeats"]
fam = term_family_ds(9, 3)
sets = build_search_sets(9, 3, {{"type": "full_grid", "N": [16, 8, 4]}})
g = grouped(fam, sets)
X = uniform_nodes(9, m, seed=0)
op = BlockFourierOperator(X, g)
rng = np.random.default_rng(0)
c = rng.normal(size=len(g)) + 1j * rng.normal(size=len(g))
res = {{"backend": _kernels.BACKEND, "n_freq": len(g), "n_nodes": m}}

y = op.forward(c)                      # warm-up / compile
t = [0.0] * repeats
for r in range(repeats):
    t0 = time.perf_counter(); op.forward(c); t[r] = time.perf_counter() - t0
res["forward_s"] = min(t)
op.adjoint(y)
for r in range(repeats):
    t0 = time.perf_counter(); op.adjoint(y); t[r] = time.perf_counter() - t0
res["adjoint_s"] = min(t)

freqs = g.embedded()
z = np.arange(1, 10, dtype=np.int64) * 7919
_kernels.residues(freqs, z, 104729)
t0 = time.perf_counter()
for _ in range(50):
    _kernels.residues(freqs, z, 104729)
res["residues_50x_s"] = time.perf_counter() - t0

_kernels.testfun_values(X.points)
t0 = time.perf_counter(); _kernels.testfun_values(X.points)
res["testfun_s"] = time.perf_counter() - t0
print("RESULT " + json.dumps(res))
"""


def run_backend(pure: bool, cfg: dict) -> dict:
    env = dict(os.environ)
    if pure:
        env["ANOVAFOURIER_PURE_NUMPY"] = "1"
    else:
        env.pop("ANOVAFOURIER_PURE_NUMPY", None)
    code = WORKER.format(cfg=json.dumps(cfg))
    proc = subprocess.run([sys.executable, "-c", code], env=env,
                          capture_output=True, text=True, check=True)
    for line in proc.stdout.splitlines():
        if line.startswith("RESULT "):
            return json.loads(line[len("RESULT "):])
    raise RuntimeError(proc.stdout + proc.stderr)


def main() -> None:
    ap = argparse.ArgumentParser()
    ap.add_argument("--nodes", type=int, default=50_000)
    ap.add_argument("--repeats", type=int, default=3)
    args = ap.parse_args()
    cfg = {"nodes": args.nodes, "repeats": args.repeats}
    rows = [run_backend(False, cfg), run_backend(True, cfg)]
    keys = ["forward_s", "adjoint_s", "residues_50x_s", "testfun_s"]
    print(f"{args.nodes} nodes x {rows[0]['n_freq']} frequencies")
    print(f"{'kernel':<16}" + "".join(f"{r['backend']:>12}" for r in rows)
          + f"{'speedup':>10}")
    for k in keys:
        base = rows[1][k]
        print(f"{k:<16}" + "".join(f"{r[k]:>12.4f}" for r in rows)
              + f"{base / rows[0][k]:>9.1f}x")


if __name__ == "__main__":
    main()
