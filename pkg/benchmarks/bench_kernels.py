"""Compare the numba and pure-numpy kernel backends.

Usage::

    python benchmarks/bench_kernels.py [--size N] [--repeat R] [--end-to-end]

Kernel timings call both backend modules directly (numba versions are
compiled once before timing).  ``--end-to-end`` also times a full simulation
run in fresh interpreters with ``IMR_DISABLE_NUMBA`` set to 0 and to 1.
"""

import argparse
import os
import subprocess
import sys
import timeit

import numpy as np

from imr.kernels import _numba, _numpy


def _inputs(size, rng):
    n_groups = 64
    ids = rng.integers(0, n_groups, size)
    values = rng.normal(size=size)
    weights = rng.random(size)
    # a random tree with 256 nodes and 1-4 children each
    n_nodes = 256
    counts = rng.integers(1, 5, n_nodes)
    offsets = np.r_[0, np.cumsum(counts)]
    cumprobs = np.concatenate([np.cumsum(rng.dirichlet(np.ones(c))) for c in counts])
    children = rng.integers(0, n_nodes, offsets[-1])
    nodes = rng.integers(0, n_nodes, size)
    uniforms = rng.random(size)
    return {
        "group_sums": (ids, values, n_groups),
        "group_moments": (ids, values, weights, n_groups),
        "sample_children": (nodes, uniforms, offsets, cumprobs, children),
    }


def bench_kernels(size, repeat):
    args = _inputs(size, np.random.default_rng(0))
    rows = []
    for name, a in args.items():
        fast, slow = getattr(_numba, name), getattr(_numpy, name)
        ra, rb = fast(*a), slow(*a)  # also triggers compilation
        same = all(np.allclose(x, y, rtol=1e-12, atol=1e-12) for x, y in
                   zip(ra if isinstance(ra, tuple) else (ra,), rb if isinstance(rb, tuple) else (rb,)))
        t_fast = min(timeit.repeat(lambda: fast(*a), number=1, repeat=repeat))
        t_slow = min(timeit.repeat(lambda: slow(*a), number=1, repeat=repeat))
        rows.append((name, t_fast, t_slow, same))
    return rows


_E2E = """
import time
from imr.generators import RandomPayoff, random_model
from imr.montecarlo import SimulationConfig, estimate_projection
m = random_model(0, n_steps=5)
estimate_projection(m, SimulationConfig(1, 1000), RandomPayoff(0))  # warm-up
t = time.perf_counter()
estimate_projection(m, SimulationConfig(1, {n}), RandomPayoff(0))
print(time.perf_counter() - t)
"""


def bench_end_to_end(n_paths):
    out = {}
    for flag in ("0", "1"):
        env = dict(os.environ, IMR_DISABLE_NUMBA=flag)
        proc = subprocess.run([sys.executable, "-c", _E2E.format(n=n_paths)], env=env,
                              capture_output=True, text=True, check=True)
        out[flag] = float(proc.stdout.strip())
    return out


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--size", type=int, default=1_000_000)
    p.add_argument("--repeat", type=int, default=5)
    p.add_argument("--end-to-end", action="store_true")
    p.add_argument("--n-paths", type=int, default=200_000)
    args = p.parse_args(argv)

    print(f"kernel timings, {args.size} elements, best of {args.repeat}")
    print(f"{'kernel':<18}{'numba [ms]':>12}{'numpy [ms]':>12}{'speedup':>10}  same")
    for name, tf, ts, same in bench_kernels(args.size, args.repeat):
        print(f"{name:<18}{tf * 1e3:>12.2f}{ts * 1e3:>12.2f}{ts / tf:>10.1f}  {same}")
    if args.end_to_end:
        t = bench_end_to_end(args.n_paths)
        print(f"\nprojection estimate, {args.n_paths} paths: numba {t['0']:.2f}s, numpy {t['1']:.2f}s")


if __name__ == "__main__":
    main()
