#!/usr/bin/env python3
"""Compare the two ways to run a hypothetical link failure.

Either checkpoint the whole engine, mutate, and restore, or remove the
failed link's rules and reinsert them (sound because insert/remove invert
each other on labels). Removal cost scales with the rules on the link,
snapshotting with total state size, so the crossover matters: this prints
both for a generated plane.

    python benchmarks/bench_whatif.py --rules 50000
"""

import argparse
import sys
import tempfile
import time
from pathlib import Path

from deltanet.engine import Engine
from deltanet.trace import Topology, generate_dataset, load_plane, random_prefix_pool


def ring_with_chords(n: int) -> Topology:
    edges = [(f"s{i}", f"s{(i + 1) % n}") for i in range(n)]
    edges += [(f"s{c}", f"s{(c * 3 + 5) % n}") for c in (1, 2, 3)]
    return Topology(edges)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--rules", type=int, default=50_000)
    parser.add_argument("--nodes", type=int, default=16)
    parser.add_argument("--queries", type=int, default=20)
    parser.add_argument("--seed", type=int, default=3)
    args = parser.parse_args(argv)

    topo = ring_with_chords(args.nodes)
    prefixes = random_prefix_pool(max(1, args.rules // (args.nodes - 1)), 32, args.seed)
    with tempfile.TemporaryDirectory() as tmp:
        trace_path = Path(tmp) / "plane.trace"
        generate_dataset(topo, prefixes, trace_path, seed=args.seed)
        engine = Engine(k=32)
        rules = load_plane(trace_path, engine)
        links = sorted(engine.links())[: args.queries]
        print(f"plane: {rules} rules, {engine.atom_count()} atoms, backend {engine.backend}")

        start = time.perf_counter()
        for link in links:
            snap = engine.checkpoint()
            for r in engine.rules_on_link(*link):
                engine.remove_rule(r.rule_id)
            engine.restore(snap)
        snap_time = (time.perf_counter() - start) / len(links)

        start = time.perf_counter()
        for link in links:
            doomed = engine.rules_on_link(*link)
            for r in doomed:
                engine.remove_rule(r.rule_id)
            for r in doomed:
                engine.insert_rule(r)
        reinsert_time = (time.perf_counter() - start) / len(links)

        print(f"checkpoint/restore:    {1000 * snap_time:8.2f} ms/query")
        print(f"remove-then-reinsert:  {1000 * reinsert_time:8.2f} ms/query")
    return 0


if __name__ == "__main__":
    sys.exit(main())
