"""Time the compiled kernels against the numpy fallback.

    python benchmarks/bench_kernels.py [--repeat 5]

Each kernel runs on identical inputs under both backends; outputs are
checked for bit-equality before timing is reported.
"""
import argparse
import math
import timeit

import numpy as np

from opstat import kernels
from opstat.codec import Disk, encode
from opstat.codec.tessellation import _candidate_neighbours
from opstat.sde import SDEConfig, brownian_increments


def cases():
    cfg = SDEConfig(x0=1.0, drift_coeff=1.0, omega=0.2, n_steps=512, seed=0)
    dB = brownian_increments(cfg, 2000)
    drift = cfg.drift_at(cfg.times()[:-1])
    em_args = (np.ones(2000), drift, math.sqrt(cfg.omega), cfg.dt, dB)

    sites = np.ascontiguousarray(encode(Disk(0.5, 0.5, 0.25), 4000, 1).points)
    indptr, indices = _candidate_neighbours(sites)
    clip_args = (sites, indptr, indices)

    vert_ptr, verts, _ = kernels.available_backends()["python"].clip_cells(*clip_args)
    raster_args = (verts, vert_ptr, 2000)
    return {
        "euler_maruyama (2000 paths x 512 steps)": ("euler_maruyama", em_args),
        "clip_cells (~4000 sites)": ("clip_cells", clip_args),
        "rasterize (~4000 cells, 2000^2)": ("rasterize", raster_args),
    }


def same(a, b):
    if isinstance(a, tuple):
        return all(np.array_equal(x, y) for x, y in zip(a, b))
    return np.array_equal(a, b)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    backends = kernels.available_backends()
    if "cython" not in backends:
        print("compiled extension not built; only the fallback is available")
    print(f"{'kernel':42s} " + " ".join(f"{b:>12s}" for b in backends) + "   speedup  identical")
    for label, (name, fargs) in cases().items():
        fns = {b: getattr(m, name) for b, m in backends.items()}
        outs = {b: f(*fargs) for b, f in fns.items()}
        times = {b: min(timeit.repeat(lambda f=f: f(*fargs), number=1, repeat=args.repeat))
                 for b, f in fns.items()}
        row = f"{label:42s} " + " ".join(f"{times[b] * 1e3:10.1f}ms" for b in backends)
        if "cython" in backends:
            row += f"   {times['python'] / times['cython']:6.2f}x  {same(outs['python'], outs['cython'])}"
        print(row)


if __name__ == "__main__":
    main()
