#!/usr/bin/env python3
"""Throughput comparison of the compiled and pure-Python engines.

Runs the standard lane set over the same packed trace with each available
backend, checks that the counters agree, and prints records/second per
backend plus the speedup.  The per-step consistency audit is off by
default so the numbers reflect the simulation loop itself.

    python benchmarks/bench_engines.py --records 100000 --audit
"""

import argparse
import time

from waymemo import harness
from waymemo.engine import available_backends, records_to_arrays, run_lanes
from waymemo.geometry import CacheGeometry
from waymemo.trace_io import IFetch, gen_loop, gen_random, next_pc


def build_trace(n: int, seed: int):
    # half loop-structured, half random: exercises hits, misses and bypasses
    loop = gen_loop(max(1, n // 32), 12, loads_per_iter=4, distinct_bases=3, seed=seed)
    rnd = gen_random(max(0, n - len(loop)), seed=seed, far_disp_frac=0.02)
    # bridge the two fetch streams with a link jump to keep pcs consistent
    last_fetch = next(r for r in reversed(loop) if isinstance(r, IFetch))
    bridge_pc = next_pc(last_fetch, 4, (1 << 32) - 1)
    return loop + [IFetch(bridge_pc, "lnk", 0x4000)] + rnd


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--records", type=int, default=100_000)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--repeat", type=int, default=3, help="best-of-N timing")
    parser.add_argument("--audit", action="store_true",
                        help="include the per-step consistency audit")
    args = parser.parse_args()

    records = build_trace(args.records, args.seed)
    ra = records_to_arrays(records)
    lanes = harness.default_lanes(include_literal_policy=True)
    lane_steps = len(records) * len(lanes)

    results = {}
    timings = {}
    for backend in available_backends():
        best = float("inf")
        for _ in range(args.repeat):
            t0 = time.perf_counter()
            res = run_lanes(ra, CacheGeometry(), lanes, audit=args.audit, backend=backend)
            best = min(best, time.perf_counter() - t0)
        results[backend] = {name: r.counters for name, r in res.items()}
        timings[backend] = best

    names = list(results)
    for other in names[1:]:
        if results[other] != results[names[0]]:
            raise SystemExit("backends disagree; run the equivalence tests")

    print(f"trace: {len(records):,} records x {len(lanes)} lanes "
          f"(audit {'on' if args.audit else 'off'})")
    base_time = timings.get("python")
    for backend in names:
        dt = timings[backend]
        rate = lane_steps / dt
        speedup = f"  ({base_time / dt:5.1f}x vs python)" if base_time and backend != "python" else ""
        print(f"  {backend:9s} {dt:8.3f} s   {rate:12,.0f} lane-records/s{speedup}")
    if len(names) > 1:
        print("counters identical across backends")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
