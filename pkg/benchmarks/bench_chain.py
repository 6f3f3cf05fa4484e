"""Compiled versus pure-Python chain kernel, plus the full PCA batch path.

    python benchmarks/bench_chain.py [--n 100 500] [--repeat 200]
"""

from __future__ import annotations

import argparse
import os
import statistics
import timeit

from vpkiaas import _chain_py, chain

try:
    from vpkiaas import _chain_ext
except ImportError:
    _chain_ext = None


def _inputs(n: int):
    ik_tkt = os.urandom(32)
    keys = [b"\x04" + os.urandom(64) for _ in range(n)]
    return ik_tkt, keys, 1_800_000_000, 300, os.urandom(32)


def bench_kernel(fn, n: int, repeat: int) -> float:
    args = _inputs(n)
    runs = timeit.repeat(lambda: fn(*args), number=1, repeat=repeat)
    return statistics.median(runs) * 1000


def main(argv=None) -> int:
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--n", type=int, nargs="+", default=[1, 100, 500])
    p.add_argument("--repeat", type=int, default=200)
    p.add_argument("--batch-repeat", type=int, default=10)
    args = p.parse_args(argv)

    print(f"selected backend: {chain.BACKEND}")
    if _chain_ext is None:
        print("compiled kernel not built; only the fallback is timed")
    print(f"{'n':>5} {'python ms':>10} {'cython ms':>10} {'speedup':>8}")
    for n in args.n:
        py = bench_kernel(_chain_py.derive_chain, n, args.repeat)
        if _chain_ext is not None:
            cy = bench_kernel(_chain_ext.derive_chain, n, args.repeat)
            print(f"{n:5d} {py:10.3f} {cy:10.3f} {py / cy:7.2f}x")
        else:
            print(f"{n:5d} {py:10.3f} {'-':>10} {'-':>8}")

    # the kernel next to the signing work it sits beside
    from vpkiaas.harness.bench import batch_latency

    for n in args.n:
        if n < 2:
            continue
        r = batch_latency(n, args.batch_repeat)
        print(f"full PCA batch of {n}: mean {r['mean_ms']:.1f} ms ({chain.BACKEND} kernel)")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
