"""Compare the compiled path engine against the pure-Python mirror.

Both engines implement the same substep scheme on the same RNG streams,
so the comparison is pure throughput; the script also asserts bitwise
agreement on every output buffer before trusting the timings.

Run from the repository root:

    python3 benchmarks/bench_paths.py [--paths N]
"""

import argparse
import time

import numpy as np

from dunkl import _paths_py
from dunkl.rootsys import make_rank_one, make_z2d

try:
    from dunkl import _paths
except ImportError:
    _paths = None


def run_full(eng, rs, x0, n, n_base, dt, T, seed=7):
    d = len(x0)
    axes = np.array([int(np.argmax(np.abs(r))) for r in rs.roots],
                    dtype=np.int64)
    states = np.zeros((n, n_base + 1, d))
    flagged = np.zeros(n, np.uint8)
    jumps = np.empty((max(1024, 8 * n), 3 + 2 * d))
    subs = np.zeros(n, np.int64)
    caps = np.zeros(n, np.int64)
    mw = np.full(n, np.inf)
    nj = np.zeros(n, np.int64)
    t0 = time.perf_counter()
    tot = eng.run_paths(np.asarray(x0, float), T, dt, 0.1, seed, 0, n,
                        n_base, np.asarray(rs.roots, float),
                        np.asarray(rs.kappa, float), axes, True, states,
                        flagged, jumps, subs, caps, mw, nj)
    el = time.perf_counter() - t0
    return el, (states, flagged, jumps[:tot], subs, caps, mw, nj)


def run_radial(eng, rs, x0, n, n_base, dt, T, seed=7):
    d = len(x0)
    states = np.zeros((n, n_base + 1, d))
    flagged = np.zeros(n, np.uint8)
    subs = np.zeros(n, np.int64)
    halv = np.zeros(n, np.int64)
    mw = np.full(n, np.inf)
    t0 = time.perf_counter()
    eng.run_radial(np.asarray(x0, float), T, dt, seed, 0, n, n_base,
                   np.asarray(rs.kappa, float), True, states, flagged,
                   subs, halv, mw)
    el = time.perf_counter() - t0
    return el, (states, flagged, subs, halv, mw)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--paths", type=int, default=2000,
                    help="paths per case (pure Python pays per substep)")
    args = ap.parse_args()
    if _paths is None:
        raise SystemExit("compiled engine not built; run "
                         "'python3 setup.py build_ext --inplace' first")

    cases = [
        ("full rank-one k=1.0", run_full, make_rank_one(1.0), [1.0]),
        ("full z2^2 k=(.6,.9)", run_full, make_z2d(2, [0.6, 0.9]),
         [0.8, 1.1]),
        ("radial rank-one", run_radial, make_rank_one(1.0), [1.0]),
        ("radial z2^2", run_radial, make_z2d(2, [0.6, 0.9]), [0.7, 0.9]),
    ]
    n, n_base, dt, T = args.paths, 250, 0.002, 0.5
    sub_total = n * n_base

    print(f"{n} paths, {n_base} base steps, dt={dt}, T={T}")
    print(f"{'case':<22} {'compiled':>10} {'python':>10} {'speedup':>9}"
          f" {'paths/s':>12}")
    for name, runner, rs, x0 in cases:
        tc, out_c = runner(_paths, rs, x0, n, n_base, dt, T)
        tp, out_p = runner(_paths_py, rs, x0, n, n_base, dt, T)
        for a, b in zip(out_c, out_p):
            assert np.array_equal(a, b), f"{name}: backend outputs differ"
        print(f"{name:<22} {tc:>9.3f}s {tp:>9.3f}s {tp / tc:>8.1f}x"
              f" {n / tc:>12.0f}")
    print(f"(~{sub_total} substeps per case; outputs verified identical)")


if __name__ == "__main__":
    main()
