"""Compare the compiled kernels against their pure-Python bodies.

    python3 benchmarks/bench_kernels.py [--accesses 200000] [--repeat 3]

The same inputs go through ``kernel`` (numba) and ``kernel.py_func``; the
outputs are checked for equality before timings are printed.
"""
import argparse
import time

import numpy as np

from gpumemlab import kernels
from gpumemlab._accel import HAVE_NUMBA
from gpumemlab.cache import CacheState
from gpumemlab.presets import load_cache


def _cache_inputs(name, n):
    cfg = load_cache(name)
    N = cfg.size + cfg.block_size
    addrs = (np.arange(n, dtype=np.int64) * 4) % N
    st = CacheState(cfg, seed=1)
    set_idx, block, sector, group, _ = cfg.decompose(addrs)
    draws = np.random.default_rng(1).random(n)
    return st, (set_idx, block, sector, group, draws)


def run_cache(fn, name, n):
    st, (set_idx, block, sector, group, draws) = _cache_inputs(name, n)
    hit = np.zeros(n, dtype=np.bool_)
    ew = np.empty(n, dtype=np.int64)
    et = np.empty(n, dtype=np.int64)
    t = time.perf_counter()
    fn(set_idx, block, sector, group, draws, st.tags, st.stamps, st.valid, st.frames, st._code,
       st._cdf, st._group_size, st._hot_way, st.alt_parity, st.alt_rr, 0, hit, ew, et)
    return time.perf_counter() - t, hit


def run_walk(fn, n):
    arr = (np.arange(n, dtype=np.int64) + 7) % n
    t = time.perf_counter()
    out = fn(arr, 0, n)
    return time.perf_counter() - t, out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--accesses", type=int, default=200_000)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)
    if not HAVE_NUMBA:
        print("numba unavailable or disabled; both columns run the Python path")
    n = args.accesses
    print(f"{'kernel':28s} {'numba s':>10s} {'python s':>10s} {'speedup':>8s}")
    cases = [(f"cache_run[{c}]", lambda f, c=c: run_cache(f, c, n))
             for c in ("gtx780-texL1", "fermi-L1", "l2tlb")]
    cases.append(("walk_chase", lambda f: run_walk(f, n)))
    fns = {"cache_run": kernels.cache_run, "walk_chase": kernels.walk_chase}
    for label, run in cases:
        fn = fns[label.split("[")[0]]
        run(fn)  # compile / warm up
        fast = min(run(fn)[0] for _ in range(args.repeat))
        slow, ref = run(fn.py_func)
        _, got = run(fn)
        assert np.array_equal(ref, got), f"{label}: paths disagree"
        print(f"{label:28s} {fast:10.4f} {slow:10.4f} {slow / fast:8.1f}x")


if __name__ == "__main__":
    main()
