#!/usr/bin/env python3
"""Benchmark the compiled engine core against the pure-Python fallback.

Generates one synthetic dataset (shortest-path rules over a ring-with-chords
topology), replays it once per available backend, and prints per-op timings
plus the speedup. Use --check loops to include per-op loop checking.

    python benchmarks/bench_cores.py --rules 30000
"""

import argparse
import sys
import tempfile
import time
from pathlib import Path

from deltanet.engine import Engine, available_backends
from deltanet.trace import Topology, generate_dataset, parse_trace, random_prefix_pool, replay


def chordal_ring(n: int, chords: int = 3) -> Topology:
    edges = [(f"s{i}", f"s{(i + 1) % n}") for i in range(n)]
    for c in range(1, chords + 1):
        step = 2 + c
        edges.append((f"s{c}", f"s{(c + step) % n}"))
    return Topology(edges)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--rules", type=int, default=30_000)
    parser.add_argument("--nodes", type=int, default=16)
    parser.add_argument("--seed", type=int, default=7)
    parser.add_argument("--check", choices=("none", "loops"), default="none")
    parser.add_argument("--removal", choices=("none", "random_order"), default="none")
    args = parser.parse_args(argv)

    topo = chordal_ring(args.nodes)
    n_prefixes = max(1, args.rules // (args.nodes - 1))
    prefixes = random_prefix_pool(n_prefixes, 32, seed=args.seed)
    with tempfile.TemporaryDirectory() as tmp:
        trace_path = Path(tmp) / "bench.trace"
        stats = generate_dataset(
            topo, prefixes, trace_path, removal=args.removal, seed=args.seed
        )
        print(f"dataset: {stats['ops']} ops, {stats['rules']} rules, "
              f"{n_prefixes} prefixes, {args.nodes} nodes")
        results = {}
        for backend in available_backends():
            engine = Engine(k=32, backend=backend)
            ops = parse_trace(trace_path)
            start = time.perf_counter()
            metrics = replay(ops, engine, check=args.check)
            wall = time.perf_counter() - start
            results[backend] = wall
            print(
                f"{backend:>9}: {wall:7.2f} s total, "
                f"{1e6 * wall / metrics.op_count:7.2f} us/op wall, "
                f"median {metrics.median_micros:6.1f} us, "
                f"mean {metrics.mean_micros:6.1f} us, "
                f"atoms {metrics.total_atoms}"
            )
        if len(results) == 2:
            print(f"speedup (pure / compiled): {results['python'] / results['compiled']:.2f}x")
        else:
            print("compiled core not built; nothing to compare", file=sys.stderr)
    return 0


if __name__ == "__main__":
    sys.exit(main())
