"""Compiled vs numpy flux kernels, per call and end to end.

    python3 benchmarks/bench_kernels.py [--repeat 200] [--steps 256]
"""

import argparse
import os
import subprocess
import sys
import timeit

import numpy as np

from spdelab import _kernels_py
from spdelab.config import build_model, default_config

try:
    from spdelab import _kernels as compiled
except ImportError:
    compiled = None

END_TO_END = """
import time
from spdelab.config import build_model, build_rng, build_scheme, default_config
from spdelab.scheme import run_trajectory
cfg = default_config()
model, scheme, rng = build_model(cfg), build_scheme(cfg, steps={steps}), build_rng(cfg)
t0 = time.perf_counter()
for j in range({paths}):
    run_trajectory(model, scheme, None, rng, j)
print(time.perf_counter() - t0)
"""


def kernel_table(repeat):
    cfg = default_config()
    rows = []
    for nodes in (63, 255, 1023):
        cfg["mesh"]["nodes"] = nodes
        model = build_model(cfg)
        u = np.ascontiguousarray(np.random.default_rng(0).normal(size=nodes))
        params, h = model.flux_params(), model.mesh.h
        for jac in (False, True):
            py = min(timeit.repeat(lambda: _kernels_py.flux_assemble(u, h, params, jac), number=repeat, repeat=3)) / repeat
            cy = np.nan
            if compiled is not None:
                cy = min(timeit.repeat(lambda: compiled.flux_assemble(u, h, params, jac), number=repeat, repeat=3)) / repeat
            rows.append((nodes, jac, py, cy))
    return rows


def end_to_end(steps, paths, pure):
    env = dict(os.environ)
    if pure:
        env["SPDELAB_PURE_PYTHON"] = "1"
    out = subprocess.run(
        [sys.executable, "-c", END_TO_END.format(steps=steps, paths=paths)], env=env, capture_output=True, text=True, check=True
    )
    return float(out.stdout.strip())


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=200)
    ap.add_argument("--steps", type=int, default=256)
    ap.add_argument("--paths", type=int, default=4)
    args = ap.parse_args(argv)
    print(f"{'nodes':>6} {'jacobian':>8} {'numpy [us]':>11} {'cython [us]':>12} {'speedup':>8}")
    for nodes, jac, py, cy in kernel_table(args.repeat):
        print(f"{nodes:6d} {str(jac):>8} {py * 1e6:11.1f} {cy * 1e6:12.1f} {py / cy:8.1f}")
    py = end_to_end(args.steps, args.paths, pure=True)
    print(f"\n{args.paths} paths x {args.steps} steps: numpy {py:.2f} s", end="")
    if compiled is not None:
        cy = end_to_end(args.steps, args.paths, pure=False)
        print(f", cython {cy:.2f} s, speedup {py / cy:.1f}")
    else:
        print(" (compiled extension not built)")


if __name__ == "__main__":
    main()
