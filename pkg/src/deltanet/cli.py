"""Command-line driver: replay, gen, whatif, allpairs, stats.

Exit codes: 0 clean, 1 property violations found, 2 input or usage error.
"""

from __future__ import annotations

import argparse
import sys
import time
from itertools import combinations

from . import analysis, trace
from .engine import Engine
from .errors import DeltaNetError

__all__ = ["main"]


def _add_shared(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--topo", help="topology file (validates trace node names)")
    parser.add_argument("--trace", help="trace file, or - for stdin")
    parser.add_argument("--k", type=int, default=32, help="address bit width (default 32)")
    parser.add_argument("--seed", type=int, default=0, help="RNG seed where applicable")
    parser.add_argument("--metrics-out", help="write per-op metrics CSV here")
    parser.add_argument(
        "--format", choices=("text", "machine"), default="text", help="report format"
    )
    parser.add_argument(
        "--backend",
        choices=("auto", "compiled", "python"),
        default=None,
        help="engine core selection (default: auto)",
    )


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="deltanet",
        description="incremental data-plane verifier over an atom-labelled forwarding graph",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("replay", help="replay a trace, optionally checking loops per op")
    _add_shared(p)
    p.add_argument("--check", choices=("none", "loops"), default="loops")

    p = sub.add_parser("gen", help="generate a synthetic trace from a topology and prefixes")
    _add_shared(p)
    p.add_argument("--prefixes", required=True, help="file with one prefix per line")
    p.add_argument("--policy", choices=("random_priority", "longest_prefix"), default="random_priority")
    p.add_argument("--removal", choices=("none", "random_order"), default="none")
    p.add_argument("--assign", help="optional 'prefix node' destination assignment file")
    p.add_argument("-o", "--out", required=True, help="output trace path")

    p = sub.add_parser("whatif", help="link-failure what-if over a plane built from a trace's adds")
    _add_shared(p)
    p.add_argument(
        "--fail", nargs=2, action="append", metavar=("SRC", "DST"), help="fail this link (repeatable)"
    )
    p.add_argument("--all-single-links", action="store_true", help="query every link once")
    p.add_argument("--all-link-pairs", action="store_true", help="query every unordered link pair")
    p.add_argument(
        "--check",
        choices=("report_only", "loops", "blackholes"),
        default="report_only",
        help="how much to classify per failure",
    )

    p = sub.add_parser("allpairs", help="all-pairs reachability closure of the replayed plane")
    _add_shared(p)

    p = sub.add_parser("stats", help="replay a trace and report totals plus memory estimate")
    _add_shared(p)
    return parser


def _require_trace(args) -> object:
    if not args.trace:
        raise DeltaNetError("--trace is required for this command")
    return sys.stdin if args.trace == "-" else args.trace


def _topology(args):
    return trace.Topology.load(args.topo) if args.topo else None


def cmd_replay(args) -> int:
    engine = Engine(k=args.k, backend=args.backend)
    from .prefix import AddressSpace

    ops = trace.parse_trace(_require_trace(args), AddressSpace(args.k), _topology(args))
    metrics = trace.replay(ops, engine, check=args.check, metrics_out=args.metrics_out)
    print(metrics.summary(), end="")
    print(f"violations: {metrics.violations}")
    for report in metrics.loop_reports:
        print(report.machine_line() if args.format == "machine" else str(report))
    return 1 if metrics.violations else 0


def cmd_gen(args) -> int:
    if not args.topo:
        raise DeltaNetError("--topo is required for gen")
    topo = trace.Topology.load(args.topo)
    with open(args.prefixes, encoding="utf-8") as fh:
        prefixes = [line.strip() for line in fh if line.strip() and not line.startswith("#")]
    assignment = None
    if args.assign:
        assignment = {}
        with open(args.assign, encoding="utf-8") as fh:
            for line in fh:
                if line.strip() and not line.startswith("#"):
                    prefix_text, node = line.split()
                    assignment[prefix_text] = node
    stats = trace.generate_dataset(
        topo,
        prefixes,
        args.out,
        policy=args.policy,
        removal=args.removal,
        seed=args.seed,
        k=args.k,
        assignment=assignment,
    )
    print(f"wrote {stats['ops']} operations ({stats['rules']} rules, {stats['skipped']} skipped)")
    return 0


def cmd_whatif(args) -> int:
    engine = Engine(k=args.k, backend=args.backend)
    trace.load_plane(_require_trace(args), engine)
    failures: list[list[tuple[str, str]]] = []
    links = sorted(engine.links())
    if args.fail:
        failures.append([tuple(pair) for pair in args.fail])
    if args.all_single_links:
        failures.extend([[link] for link in links])
    if args.all_link_pairs:
        failures.extend([[a, b] for a, b in combinations(links, 2)])
    if not failures:
        raise DeltaNetError("nothing to fail: use --fail, --all-single-links or --all-link-pairs")
    total = 0.0
    for failure in failures:
        start = time.perf_counter()
        report = analysis.what_if_fail_links(engine, failure, check=args.check)
        total += time.perf_counter() - start
        lines = (
            report.machine_lines(engine)
            if args.format == "machine"
            else report.text_lines(engine)
        )
        for line in lines:
            print(line)
    print(f"average query time: {1000.0 * total / len(failures):.3f} ms over {len(failures)} queries")
    return 0


def cmd_allpairs(args) -> int:
    engine = Engine(k=args.k, backend=args.backend)
    from .prefix import AddressSpace

    ops = trace.parse_trace(_require_trace(args), AddressSpace(args.k), _topology(args))
    trace.replay(ops, engine, check="none")
    closure = analysis.all_pairs_closure(engine)
    for line in closure.machine_lines():
        print(line)
    return 0


def cmd_stats(args) -> int:
    engine = Engine(k=args.k, backend=args.backend)
    from .prefix import AddressSpace

    ops = trace.parse_trace(_require_trace(args), AddressSpace(args.k), _topology(args))
    metrics = trace.replay(ops, engine, check="none", metrics_out=args.metrics_out)
    print(metrics.summary(), end="")
    est = engine.memory_estimate()
    print(f"label bytes: {est['label_bytes']}")
    print(f"owner entries: {est['owner_entries']}")
    print(f"estimated state bytes: {est['total_bytes']}")
    return 0


_COMMANDS = {
    "replay": cmd_replay,
    "gen": cmd_gen,
    "whatif": cmd_whatif,
    "allpairs": cmd_allpairs,
    "stats": cmd_stats,
}


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except DeltaNetError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
