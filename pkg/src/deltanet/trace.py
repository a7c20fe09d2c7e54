"""Trace and topology file formats, dataset generation, and replay.

Trace grammar (bit-exact): UTF-8, LF line endings, single-space separated
tokens, comment lines start with ``#``::

    + <id:uint64> <src:token> <dst:token|DROP> <prio:uint32> <prefix>
    - <id:uint64>

A del line must name a currently installed id. Prefix text follows the
``prefix`` module: dotted-quad for k=32, ``<base>/<len>`` otherwise.

Topology files hold one undirected edge per line (``<node> <node>``) plus
optional ``host <node>`` lines marking attachment points for generated
destinations.

The generator emits, for every prefix with destination d, one rule per
other node pointing along its shortest path toward d (BFS over unit
weights, ties broken toward the smallest node name), then optionally
removes everything in seeded-random order, doubling the operation count.
Output is byte-identical for equal inputs and seed.
"""

from __future__ import annotations

import random
import time
from dataclasses import dataclass, field

from .engine import DROP, Engine, Rule
from .errors import DanglingDelete, MalformedTrace
from .prefix import AddressSpace, parse_prefix, prefix_to_interval

__all__ = [
    "TraceOp",
    "Topology",
    "parse_trace",
    "serialize_ops",
    "generate_dataset",
    "random_prefix_pool",
    "replay",
    "ReplayMetrics",
]


@dataclass(frozen=True)
class TraceOp:
    """One replayable operation: a rule insertion or removal."""

    kind: str  # 'add' | 'del'
    rule_id: int
    src: str = ""
    dst: str = ""
    priority: int = 0
    prefix: str = ""

    def line(self) -> str:
        if self.kind == "add":
            return f"+ {self.rule_id} {self.src} {self.dst} {self.priority} {self.prefix}"
        return f"- {self.rule_id}"


class Topology:
    """Undirected edge list over named nodes with host-attachment marks."""

    def __init__(self, edges, hosts=()):
        self.adj: dict[str, list[str]] = {}
        self.edges = []
        for a, b in edges:
            if a == b:
                raise MalformedTrace(f"self edge {a}")
            if DROP in (a, b):
                raise MalformedTrace(f"{DROP} is reserved and cannot appear in a topology")
            self.edges.append((a, b))
            self.adj.setdefault(a, []).append(b)
            self.adj.setdefault(b, []).append(a)
        for n in hosts:
            self.adj.setdefault(n, [])
        for n in self.adj:
            self.adj[n].sort()
        self.hosts = [n for n in hosts if n in self.adj]
        bad = set(hosts) - set(self.adj)
        if bad:
            raise MalformedTrace(f"host marks for unknown nodes: {sorted(bad)}")

    @classmethod
    def load(cls, path) -> "Topology":
        edges, hosts = [], []
        with open(path, encoding="utf-8") as fh:
            for lineno, raw in enumerate(fh, 1):
                line = raw.rstrip("\n")
                if not line or line.startswith("#"):
                    continue
                parts = line.split(" ")
                if parts[0] == "host" and len(parts) == 2:
                    hosts.append(parts[1])
                elif len(parts) == 2:
                    edges.append((parts[0], parts[1]))
                else:
                    raise MalformedTrace("expected '<node> <node>' or 'host <node>'", lineno)
        return cls(edges, hosts)

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            for a, b in self.edges:
                fh.write(f"{a} {b}\n")
            for h in self.hosts:
                fh.write(f"host {h}\n")

    def nodes(self) -> list[str]:
        return sorted(self.adj)

    def is_connected(self) -> bool:
        if not self.adj:
            return True
        seen = set()
        stack = [next(iter(self.adj))]
        while stack:
            n = stack.pop()
            if n in seen:
                continue
            seen.add(n)
            stack.extend(self.adj[n])
        return len(seen) == len(self.adj)

    def next_hops_toward(self, dest: str) -> dict[str, str]:
        """Shortest-path next hop toward ``dest`` for every reachable node.

        Among equidistant neighbours the smallest name wins, so generated
        datasets are deterministic.
        """
        dist = {dest: 0}
        frontier = [dest]
        while frontier:
            nxt = []
            for u in frontier:
                for v in self.adj[u]:
                    if v not in dist:
                        dist[v] = dist[u] + 1
                        nxt.append(v)
            frontier = nxt
        hops = {}
        for node, d in dist.items():
            if node == dest:
                continue
            hops[node] = min(v for v in self.adj[node] if dist.get(v, -1) == d - 1)
        return hops


def parse_trace(source, space: AddressSpace | None = None, topology: Topology | None = None):
    """Stream :class:`TraceOp` values from a path or open text file.

    Validates the grammar line by line (never loads the whole file), tracks
    installed ids so deletes of absent ids fail fast, and optionally checks
    node names against a topology. Errors carry the 1-based line number.
    """
    if hasattr(source, "read"):
        yield from _parse_stream(source, space, topology)
    else:
        with open(source, encoding="utf-8") as fh:
            yield from _parse_stream(fh, space, topology)


def _parse_stream(fh, space, topology):
    known = None
    if topology is not None:
        known = set(topology.adj) | {DROP}
    live = set()
    for lineno, raw in enumerate(fh, 1):
        line = raw.rstrip("\n")
        if not line or line.startswith("#"):
            continue
        parts = line.split(" ")
        if parts[0] == "+":
            if len(parts) != 6:
                raise MalformedTrace("add lines need 6 fields", lineno)
            rid = _parse_id(parts[1], lineno)
            src, dst = parts[2], parts[3]
            if known is not None:
                for name in (src, dst):
                    if name not in known:
                        raise MalformedTrace(f"unknown node {name!r}", lineno)
            if not parts[4].isdigit():
                raise MalformedTrace(f"bad priority {parts[4]!r}", lineno)
            if space is not None:
                try:
                    parse_prefix(parts[5], space)
                except Exception as exc:
                    raise MalformedTrace(str(exc), lineno) from exc
            if rid in live:
                raise MalformedTrace(f"rule id {rid} added twice", lineno)
            live.add(rid)
            yield TraceOp("add", rid, src, dst, int(parts[4]), parts[5])
        elif parts[0] == "-":
            if len(parts) != 2:
                raise MalformedTrace("del lines need 2 fields", lineno)
            rid = _parse_id(parts[1], lineno)
            if rid not in live:
                raise DanglingDelete(f"del of rule id {rid} that is not installed", lineno)
            live.discard(rid)
            yield TraceOp("del", rid)
        else:
            raise MalformedTrace(f"unknown operation {parts[0]!r}", lineno)


def _parse_id(text: str, lineno: int) -> int:
    if not text.isdigit():
        raise MalformedTrace(f"bad rule id {text!r}", lineno)
    return int(text)


def serialize_ops(ops) -> str:
    return "".join(op.line() + "\n" for op in ops)


def random_prefix_pool(n: int, k: int, seed: int) -> list[str]:
    """Distinct random prefixes with a routing-table-like length mix."""
    from .prefix import IpPrefix, format_prefix

    rng = random.Random(seed)
    space = AddressSpace(k)
    lengths = list(range(max(1, k // 4), k + 1))
    mid = max(1, (3 * k) // 4)
    weights = [4 if abs(length - mid) <= k // 8 else 1 for length in lengths]
    seen = set()
    out = []
    while len(out) < n:
        length = rng.choices(lengths, weights)[0]
        base = rng.randrange(1 << k) & ~((1 << (k - length)) - 1)
        if (base, length) in seen:
            continue
        seen.add((base, length))
        out.append(format_prefix(IpPrefix(base, length), space))
    return out


def generate_dataset(
    topo: Topology,
    prefixes: list[str],
    out_path,
    policy: str = "random_priority",
    removal: str = "none",
    seed: int = 0,
    k: int = 32,
    assignment: dict[str, str] | None = None,
) -> dict:
    """Write a synthetic trace; returns stats (rules, skipped pairs).

    Destinations come from ``assignment`` when given, else round-robin over
    host-marked nodes (all nodes when none are marked).
    """
    if policy not in ("random_priority", "longest_prefix"):
        raise ValueError(f"unknown policy {policy!r}")
    if removal not in ("none", "random_order"):
        raise ValueError(f"unknown removal mode {removal!r}")
    rng = random.Random(seed)
    space = AddressSpace(k)
    targets = topo.hosts or topo.nodes()
    if not targets:
        raise MalformedTrace("topology has no nodes")
    hops_cache: dict[str, dict[str, str]] = {}
    rid = 0
    skipped = 0
    ids = []
    with open(out_path, "w", encoding="utf-8", newline="\n") as fh:
        for i, text in enumerate(prefixes):
            p = parse_prefix(text, space)
            dest = assignment.get(text) if assignment else None
            if dest is None:
                dest = targets[i % len(targets)]
            hops = hops_cache.get(dest)
            if hops is None:
                hops = hops_cache[dest] = topo.next_hops_toward(dest)
            for node in topo.nodes():
                if node == dest:
                    continue
                nxt = hops.get(node)
                if nxt is None:
                    skipped += 1
                    continue
                prio = p.length if policy == "longest_prefix" else rng.randrange(1, 1 << 16)
                fh.write(f"+ {rid} {node} {nxt} {prio} {text}\n")
                ids.append(rid)
                rid += 1
        if removal == "random_order":
            order = ids.copy()
            rng.shuffle(order)
            for r in order:
                fh.write(f"- {r}\n")
    return {"rules": rid, "skipped": skipped, "ops": rid * (2 if removal == "random_order" else 1)}


@dataclass
class ReplayMetrics:
    """Per-operation timings and counters for one replay."""

    op_count: int = 0
    total_atoms: int = 0
    distinct_prefixes: int = 0
    violations: int = 0
    priority_conflicts: int = 0
    loop_reports: list = field(default_factory=list)
    micros: list = field(default_factory=list)

    MAX_KEPT_REPORTS = 50

    @property
    def median_micros(self) -> float:
        if not self.micros:
            return 0.0
        s = sorted(self.micros)
        n = len(s)
        return s[n // 2] if n % 2 else (s[n // 2 - 1] + s[n // 2]) / 2

    @property
    def mean_micros(self) -> float:
        return sum(self.micros) / len(self.micros) if self.micros else 0.0

    @property
    def pct_under_250us(self) -> float:
        if not self.micros:
            return 100.0
        return 100.0 * sum(1 for m in self.micros if m < 250) / len(self.micros)

    def summary(self) -> str:
        return (
            f"operations: {self.op_count}\n"
            f"total atoms: {self.total_atoms}\n"
            f"distinct prefixes: {self.distinct_prefixes}\n"
            f"median op time: {self.median_micros:.1f} us\n"
            f"mean op time: {self.mean_micros:.1f} us\n"
            f"ops under 250 us: {self.pct_under_250us:.1f}%\n"
            f"loop violations: {self.violations}\n"
            f"priority warnings: {self.priority_conflicts}\n"
        )


def replay(
    ops,
    engine: Engine,
    check: str = "none",
    metrics_out=None,
    flush_every_op: bool | None = None,
) -> ReplayMetrics:
    """Apply a stream of :class:`TraceOp` to the engine, timing each op.

    check='loops' runs the loop check on each operation's delta inside the
    timed window (processing and checking are one unit of work). When
    ``metrics_out`` is a path, one CSV row per op is written with the header
    ``op_index,kind,micros,delta_atoms,changed_labels,violations``.
    """
    if check not in ("none", "loops"):
        raise ValueError(f"unknown check mode {check!r}")
    from .analysis import check_loops

    if flush_every_op is None:
        import os

        flush_every_op = os.environ.get("DELTANET_METRICS_FLUSH") == "every_op"
    metrics = ReplayMetrics()
    space = AddressSpace(engine.k)
    prefixes = set()
    csv_fh = open(metrics_out, "w", encoding="utf-8", newline="\n") if metrics_out else None
    try:
        if csv_fh:
            csv_fh.write("op_index,kind,micros,delta_atoms,changed_labels,violations\n")
        for index, op in enumerate(ops):
            if op.kind == "add":
                prefixes.add(op.prefix)
                iv = prefix_to_interval(parse_prefix(op.prefix, space), space)
                rule = Rule(op.rule_id, op.src, op.dst, op.priority, iv)
                start = time.perf_counter_ns()
                delta = engine.insert_rule(rule)
                reports = check_loops(engine, delta) if check == "loops" else []
                elapsed = (time.perf_counter_ns() - start) / 1000.0
            else:
                start = time.perf_counter_ns()
                delta = engine.remove_rule(op.rule_id)
                reports = check_loops(engine, delta) if check == "loops" else []
                elapsed = (time.perf_counter_ns() - start) / 1000.0
            metrics.op_count += 1
            metrics.micros.append(elapsed)
            if reports:
                metrics.violations += len(reports)
                room = ReplayMetrics.MAX_KEPT_REPORTS - len(metrics.loop_reports)
                if room > 0:
                    metrics.loop_reports.extend(reports[:room])
            if csv_fh:
                csv_fh.write(
                    f"{index},{op.kind},{elapsed:.3f},{len(delta.split_pairs)},"
                    f"{len(delta.links())},{len(reports)}\n"
                )
                if flush_every_op:
                    csv_fh.flush()
    finally:
        if csv_fh:
            csv_fh.close()
    metrics.total_atoms = engine.atom_count()
    metrics.distinct_prefixes = len(prefixes)
    metrics.priority_conflicts = engine.priority_conflicts
    return metrics


def load_plane(trace_path, engine: Engine, adds_only: bool = True) -> int:
    """Build a consistent data plane from a trace's insertions.

    Returns the number of rules installed. With ``adds_only`` the del
    operations are skipped, matching the what-if workflow of building the
    plane from all insertions.
    """
    space = AddressSpace(engine.k)
    count = 0
    for op in parse_trace(trace_path):
        if op.kind == "add":
            iv = prefix_to_interval(parse_prefix(op.prefix, space), space)
            engine.insert_rule(Rule(op.rule_id, op.src, op.dst, op.priority, iv))
            count += 1
        elif not adds_only:
            engine.remove_rule(op.rule_id)
            count -= 1
    return count
