#!/usr/bin/env python3
"""Time the hot kernels: compiled extension against the NumPy reference.

Both backends are imported directly (bypassing LEFLAB_KERNELS) so a single
run compares them side by side and checks that they agree.
"""

import argparse
import time

import numpy as np

from leflab.kernels import pyref

try:
    from leflab.kernels import _core
except ImportError:
    _core = None


def best_of(fn, repeats):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def stencil_1d(mod, n, inner):
    u = np.random.default_rng(0).random(n)
    u[0] = u[-1] = 0.0
    out = np.empty_like(u)
    inv_h2 = float(n - 1) ** 2

    def run():
        for _ in range(inner):
            mod.neg_laplacian_1d(u, inv_h2, out)
        return out

    return run


def stencil_2d(mod, n, inner):
    u = np.random.default_rng(1).random((n, n))
    u[0, :] = u[-1, :] = u[:, 0] = u[:, -1] = 0.0
    out = np.empty_like(u)
    inv_h2 = float(n - 1) ** 2

    def run():
        for _ in range(inner):
            mod.neg_laplacian_2d(u, inv_h2, inv_h2, out)
        return out

    return run


def rk4_terminal(mod, slopes, steps):
    s = np.geomspace(1e-2, 1e2, slopes)

    def run():
        term, _ = mod.rk4_terminal(3.0, 0.5, 3.0, 1.0, s, steps)
        return term

    return run


def rk4_profile(mod, trajectories, steps):
    out = np.empty(steps + 1)

    def run():
        for i in range(trajectories):
            mod.rk4_profile(3.0, 0.5, 3.0, 1.0, 0.2 + 0.01 * i, steps, out)
        return out.copy()

    return run


WORKLOADS = (
    ("stencil-1d n=4001 x200", stencil_1d, (4001, 200)),
    ("stencil-2d 257x257 x50", stencil_2d, (257, 50)),
    ("rk4-terminal 512x4000", rk4_terminal, (512, 4000)),
    ("rk4-profile 20x4000", rk4_profile, (20, 4000)),
)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeats", type=int, default=5, help="best-of repeat count")
    args = ap.parse_args()

    if _core is None:
        print("compiled backend not importable; timing the NumPy reference only")
    for name, make, params in WORKLOADS:
        ref_run = make(pyref, *params)
        t_ref = best_of(ref_run, args.repeats)
        line = f"{name:24s} python {t_ref * 1e3:9.2f} ms"
        if _core is not None:
            core_run = make(_core, *params)
            t_core = best_of(core_run, args.repeats)
            if not np.allclose(ref_run(), core_run(), rtol=1e-12, atol=1e-12):
                raise SystemExit(f"backend mismatch in {name}")
            line += f"   cython {t_core * 1e3:9.2f} ms   speedup {t_ref / t_core:6.1f}x"
        print(line)


if __name__ == "__main__":
    main()
