"""Ground-truth and baseline implementations for differential testing.

Two independent routes to the same answers:

* :class:`AddressSim` forwards one concrete address at a time by scanning
  rule lists. It is deliberately naive, shares no code with the engine, and
  is authoritative for correctness at small bit widths where exhaustive
  sweeps are feasible.

* :class:`TrieBaseline` re-implements the classic single-field approach:
  a binary trie over prefix bits, per-operation affected equivalence
  classes, and one forwarding graph per class. It is a comparison subject
  for the benchmarks and a secondary cross-check, never an authority.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .prefix import Interval

__all__ = [
    "AddressSim",
    "Counterexample",
    "sim_vs_engine",
    "TrieBaseline",
    "trie_affected_ecs",
]

DROP = "DROP"


class AddressSim:
    """Per-address longest-priority-match forwarding over explicit rule lists."""

    def __init__(self, k: int):
        self.k = k
        self.max_addr = 1 << k
        self.rules = {}  # rid -> (src, dst, prio, lo, hi)
        self.by_node = {}  # src -> {rid: (prio, lo, hi, dst)}

    def add_rule(self, rid, src, dst, prio, lo, hi):
        assert rid not in self.rules
        self.rules[rid] = (src, dst, prio, lo, hi)
        self.by_node.setdefault(src, {})[rid] = (prio, lo, hi, dst)

    def remove_rule(self, rid):
        src = self.rules.pop(rid)[0]
        del self.by_node[src][rid]

    def next_hop(self, node, addr):
        """Destination of the best matching rule at ``node``, or None.

        Ties on priority break toward the larger rule id, matching the
        engine's documented policy.
        """
        best = None
        best_dst = None
        for rid, (prio, lo, hi, dst) in self.by_node.get(node, {}).items():
            if lo <= addr < hi and (best is None or best < (prio, rid)):
                best = (prio, rid)
                best_dst = dst
        return best_dst

    def path(self, node, addr, max_hops=None):
        """Walk ``addr`` from ``node``; returns (nodes, status).

        status is 'loop' on a node revisit, 'drop' when the drop sink is
        reached, and 'stop' when no rule matches.
        """
        seen = {node}
        path = [node]
        limit = max_hops if max_hops is not None else self.max_addr * 4 + 16
        for _ in range(limit):
            if node == DROP:
                return path, "drop"
            nxt = self.next_hop(node, addr)
            if nxt is None:
                return path, "stop"
            path.append(nxt)
            if nxt in seen:
                return path, "loop"
            seen.add(nxt)
            node = nxt
        return path, "loop"

    def loops_for_address(self, addr):
        """True iff some walk of ``addr`` revisits a node."""
        return any(
            self.path(node, addr)[1] == "loop" for node in sorted(self.by_node)
        )


@dataclass
class Counterexample:
    """Minimal engine/simulator disagreement, replayable as a mini-trace."""

    node: str
    addr: int
    expected: str | None
    got: str | None
    trace_text: str

    def __str__(self):
        return (
            f"node {self.node}, address {self.addr}: "
            f"simulator forwards to {self.expected}, engine to {self.got}"
        )


def sim_vs_engine(engine, sim: AddressSim, addresses=None) -> Counterexample | None:
    """Compare next hops node-by-node and address-by-address.

    The engine's answer is read from the link labels (its authoritative
    flow representation) and cross-checked against its owner index; the
    simulator's comes from scanning its own rule lists. Exhaustive over the
    whole space by default (keep k small); returns the first mismatch as a
    :class:`Counterexample`, or None when equivalent.
    """
    if addresses is None:
        addresses = range(sim.max_addr)
    nodes = sorted(set(sim.by_node) | {src for src, _ in engine.links()})
    out_links = {}
    for src, dst in engine.links():
        out_links.setdefault(src, []).append((dst, engine.label_of(src, dst)))
    for addr in addresses:
        atom = engine.atom_at(addr)
        for node in nodes:
            expected = sim.next_hop(node, addr)
            carrying = [dst for dst, label in out_links.get(node, ()) if atom in label]
            got = carrying[0] if len(carrying) == 1 else (tuple(carrying) or None)
            owner = engine.owner_link(atom, node)
            owner_dst = None if owner is None else owner[1]
            if expected != got or owner_dst != got:
                return Counterexample(node, addr, expected, got, _mini_trace(sim, node, addr))
    return None


def _mini_trace(sim: AddressSim, node, addr) -> str:
    from .prefix import AddressSpace, IpPrefix, format_prefix

    lines = [f"# mismatch at node {node}, address {addr}"]
    space = AddressSpace(sim.k)
    for rid in sorted(sim.rules):
        src, dst, prio, lo, hi = sim.rules[rid]
        width = hi - lo
        if width & (width - 1) == 0 and lo % width == 0:
            match_text = format_prefix(IpPrefix(lo, sim.k - width.bit_length() + 1), space)
        else:
            match_text = f"{lo}/{hi}"  # non-prefix interval, debugging aid only
        lines.append(f"+ {rid} {src} {dst} {prio} {match_text}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Veriflow-style baseline: binary trie + per-EC forwarding graphs
# ---------------------------------------------------------------------------


class _TrieNode:
    __slots__ = ("zero", "one", "rules")

    def __init__(self):
        self.zero = None
        self.one = None
        self.rules = {}  # rid -> (src, dst, prio, lo, hi)


@dataclass
class EquivalenceClass:
    """A maximal packet set with one network-wide forwarding graph."""

    interval: Interval
    edges: list = field(default_factory=list)  # (src, dst) owning links


class TrieBaseline:
    """Single-field re-implementation of the trie-based checker.

    Rules live at the trie node of their prefix; a prefix overlaps exactly
    the rules on its root path (ancestors) plus those in its subtree
    (descendants). Equivalence classes are the interval segments between
    the bounds of overlapping rules.
    """

    def __init__(self, k: int):
        self.k = k
        self.root = _TrieNode()
        self._node_of_rule = {}
        self._rules_by_link = {}  # (src, dst) -> set of rids
        self.sources = set()

    # -- maintenance -------------------------------------------------------

    def add_rule(self, rid, src, dst, prio, base, plen):
        node = self.root
        for i in range(plen):
            bit = (base >> (self.k - 1 - i)) & 1
            if bit:
                if node.one is None:
                    node.one = _TrieNode()
                node = node.one
            else:
                if node.zero is None:
                    node.zero = _TrieNode()
                node = node.zero
        lo = base
        hi = base + (1 << (self.k - plen))
        node.rules[rid] = (src, dst, prio, lo, hi)
        self._node_of_rule[rid] = node
        self._rules_by_link.setdefault((src, dst), set()).add(rid)
        self.sources.add(src)

    def remove_rule(self, rid):
        node = self._node_of_rule.pop(rid)
        src, dst, _, _, _ = node.rules.pop(rid)
        self._rules_by_link[(src, dst)].discard(rid)

    # -- lookups -------------------------------------------------------------

    def best_per_source(self, addr):
        """Owning rule per source for ``addr`` in one root-to-leaf walk."""
        best = {}
        node = self.root
        depth = 0
        while node is not None:
            for rid, (src, dst, prio, lo, hi) in node.rules.items():
                cur = best.get(src)
                if cur is None or (cur[0], cur[1]) < (prio, rid):
                    best[src] = (prio, rid, dst)
            if depth == self.k:
                break
            bit = (addr >> (self.k - 1 - depth)) & 1
            node = node.one if bit else node.zero
            depth += 1
        return best

    def overlapping_bounds(self, lo, hi, base, plen):
        """Interval bounds of every rule overlapping the prefix, clipped."""
        bounds = {lo, hi}
        node = self.root
        stack = []
        for i in range(plen):  # ancestors: prefixes containing this one
            for _, (_, _, _, rlo, rhi) in node.rules.items():
                self._clip(bounds, rlo, rhi, lo, hi)
            bit = (base >> (self.k - 1 - i)) & 1
            node = node.one if bit else node.zero
            if node is None:
                return bounds
        stack.append(node)
        while stack:  # the prefix's own node and all descendants
            n = stack.pop()
            for _, (_, _, _, rlo, rhi) in n.rules.items():
                self._clip(bounds, rlo, rhi, lo, hi)
            if n.zero is not None:
                stack.append(n.zero)
            if n.one is not None:
                stack.append(n.one)
        return bounds

    @staticmethod
    def _clip(bounds, rlo, rhi, lo, hi):
        if lo < rhi and rlo < hi:
            if lo < rlo:
                bounds.add(rlo)
            if rhi < hi:
                bounds.add(rhi)

    # -- queries ------------------------------------------------------------

    def affected_ecs(self, base, plen) -> list[EquivalenceClass]:
        """Equivalence classes overlapping one changed prefix, with graphs."""
        lo = base
        hi = base + (1 << (self.k - plen))
        cuts = sorted(self.overlapping_bounds(lo, hi, base, plen))
        return self._graphs_for_segments(zip(cuts, cuts[1:]))

    def link_failure_query(self, src, dst) -> list[EquivalenceClass]:
        """All equivalence classes using the link, each with its current
        forwarding graph; the per-failure workload of this baseline."""
        segments = set()
        for rid in self._rules_by_link.get((src, dst), ()):
            node = self._node_of_rule[rid]
            _, _, _, lo, hi = node.rules[rid]
            base = lo
            plen = self.k - (hi - lo).bit_length() + 1
            cuts = sorted(self.overlapping_bounds(lo, hi, base, plen))
            segments.update(zip(cuts, cuts[1:]))
        return self._graphs_for_segments(sorted(segments))

    def _graphs_for_segments(self, segments) -> list[EquivalenceClass]:
        out = []
        for lo, hi in segments:
            best = self.best_per_source(lo)
            edges = sorted((s, d) for s, (_, _, d) in best.items())
            out.append(EquivalenceClass(Interval(lo, hi), edges))
        return out


def trie_affected_ecs(trie: TrieBaseline, base: int, plen: int) -> list[EquivalenceClass]:
    """Affected equivalence classes and forwarding graphs for one prefix op."""
    return trie.affected_ecs(base, plen)
