"""Time one explicit field step with the numba and the numpy stencil.

    python benchmarks/bench_field.py --cells 48 96 --repeat 20

Both backends run on the same grid (hexagonal Wulff prism, constant drift)
and the script also reports their maximum difference.
"""
import argparse
import time
from dataclasses import replace

import numpy as np

from prismgrowth import HAS_NUMBA
from prismgrowth.energy import Anisotropy, wulff_shape
from prismgrowth.field import build_grid, step_field


def make_grid(cells: int, drift):
    state = wulff_shape(Anisotropy()).state()
    R = 3.0 * state.diameter
    grid = build_grid(state, 2.0 * R / cells, R, sigma_inf=1.0, drift=drift, g=np.full(8, 0.3))
    rng = np.random.default_rng(0)
    return replace(grid, sigma=grid.sigma + 0.01 * rng.standard_normal(grid.sigma.shape))


def bench(grid, backend, repeat):
    dt = 0.9 * grid.stable_dt()
    step_field(grid, dt, backend=backend)  # warm-up (JIT compile)
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = step_field(grid, dt, backend=backend)
        times.append(time.perf_counter() - t0)
    return float(np.median(times)), out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--cells", type=int, nargs="+", default=[48, 96])
    ap.add_argument("--repeat", type=int, default=10)
    ap.add_argument("--drift", type=float, nargs=3, default=[0.3, -0.2, 0.5])
    args = ap.parse_args(argv)
    backends = ["numpy"] + (["numba"] if HAS_NUMBA else [])
    print(f"{'cells':>6} {'backend':>8} {'median ms':>10} {'speed-up':>9}")
    for n in args.cells:
        grid = make_grid(n, list(args.drift))
        res = {b: bench(grid, b, args.repeat) for b in backends}
        base = res["numpy"][0]
        for b in backends:
            print(f"{n:>6d} {b:>8} {1e3 * res[b][0]:>10.2f} {base / res[b][0]:>8.1f}x")
        if "numba" in res:
            diff = np.max(np.abs(res["numba"][1].sigma - res["numpy"][1].sigma))
            print(f"{'':>6} max |numba - numpy| = {diff:.2e}")


if __name__ == "__main__":
    main()
