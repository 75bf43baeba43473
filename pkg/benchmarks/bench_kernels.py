"""Compare the compiled round-loop kernel against the numpy fallback.

Both consume the same generator bit stream, so results are byte-identical;
this script only measures throughput.  Run with:

    python3 benchmarks/bench_kernels.py [--rounds N] [--repeat R]
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from snowsim import rng
from snowsim.kernels import IMPL, fallback

try:
    from snowsim.kernels import _core
except ImportError:
    _core = None


def make_args(n=500, f=99, max_rounds=5000):
    u = n - f
    init = np.zeros(u, dtype=np.int8)
    init[: (u + 1) // 2] = 1
    a2s = np.array([72], dtype=np.int64)
    betas = np.array([12], dtype=np.int64)
    return dict(n=n, f=f, k=80, alpha1=41, a2s=a2s, betas=betas,
                max_rounds=max_rounds, init_vals=init, adversary="split")


def bench(fn, kwargs, repeat, seed=12345):
    best = float("inf")
    result = None
    for _ in range(repeat):
        gen = rng.run_generator(seed)
        t0 = time.perf_counter()
        result = fn(gen, **kwargs)
        best = min(best, time.perf_counter() - t0)
    return best, result


def main() -> int:
    ap = argparse.ArgumentParser()
    ap.add_argument("--rounds", type=int, default=5000)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()

    kwargs = make_args(max_rounds=args.rounds)
    print(f"active implementation: {IMPL}")
    t_fb, r_fb = bench(fallback.run_snowflake_tally, kwargs, args.repeat)
    print(f"fallback : {t_fb:8.4f} s for {r_fb['rounds_run']} rounds "
          f"({r_fb['rounds_run'] / t_fb:,.0f} rounds/s)")
    if _core is None:
        print("compiled : not built (pip install -e . rebuilds it)")
        return 0
    t_c, r_c = bench(_core.run_snowflake_tally, kwargs, args.repeat)
    print(f"compiled : {t_c:8.4f} s for {r_c['rounds_run']} rounds "
          f"({r_c['rounds_run'] / t_c:,.0f} rounds/s)")
    same = (np.array_equal(r_fb["decided_round"], r_c["decided_round"])
            and np.array_equal(r_fb["vals"], r_c["vals"])
            and np.array_equal(r_fb["ones_history"], r_c["ones_history"]))
    print(f"outputs identical: {same}")
    print(f"speedup: {t_fb / t_c:.2f}x")
    return 0 if same else 1


if __name__ == "__main__":
    raise SystemExit(main())
