"""Network-wide forwarding state under incremental rule updates.

An :class:`Engine` owns the atom map, the per-link atom labels and the
per-atom owner tables for one network. ``insert_rule`` and ``remove_rule``
keep the single edge-labelled graph exact under churn and return the
coalesced label changes of each operation as a :class:`DeltaGraph`.

Two interchangeable cores implement the hot loops: a compiled C++ extension
(``deltanet._ccore``, built via Cython) and a pure-Python fallback
(``deltanet._pycore``). Selection happens per engine: ``backend="auto"``
prefers the compiled core when it is importable and supports the requested
bit width; the ``DELTANET_BACKEND`` environment variable overrides the
default. Semantics are identical; only speed differs (see benchmarks/).

Concurrency: one engine has one logical writer. All calls must be
serialized by the caller; analyses may run concurrently only on separate
checkpointed copies.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

from . import _pycore
from .errors import (
    DuplicateRuleId,
    UnknownAtom,
    UnknownLink,
    UnknownNode,
    UnknownRuleId,
)
from .labels import LabelSet
from .prefix import Interval

try:
    from . import _ccore
except ImportError:  # extension not built; pure core still works
    _ccore = None

__all__ = ["DROP", "Rule", "DeltaGraph", "Snapshot", "Engine", "available_backends"]

DROP = "DROP"


def available_backends() -> tuple[str, ...]:
    return ("compiled", "python") if _ccore is not None else ("python",)


def _resolve_backend(name: str | None, k: int):
    name = name or os.environ.get("DELTANET_BACKEND") or "auto"
    if name == "auto":
        if _ccore is not None and k <= _ccore.MAX_K:
            return _ccore
        return _pycore
    if name == "compiled":
        if _ccore is None:
            raise ValueError("compiled backend requested but the extension is not built")
        if k > _ccore.MAX_K:
            raise ValueError(f"compiled backend supports k <= {_ccore.MAX_K}, got {k}")
        return _ccore
    if name == "python":
        return _pycore
    raise ValueError(f"unknown backend {name!r}")


@dataclass(frozen=True)
class Rule:
    """One forwarding-table entry: packets matching ``match`` arriving at
    ``src`` are forwarded along the directed link ``src -> dst``."""

    rule_id: int
    src: str
    dst: str
    priority: int
    match: Interval


class DeltaGraph:
    """Coalesced per-link label changes of one operation (or merged batch).

    For every touched link the added and removed atom sets are disjoint;
    links whose label ended up unchanged are dropped. ``split_pairs`` lists
    the atom splits ``(old, new)`` triggered by the operation.
    """

    __slots__ = ("_adds", "_rems", "split_pairs")

    def __init__(self, adds: dict, rems: dict, split_pairs: list):
        self._adds = adds  # (src, dst) -> int bitmask
        self._rems = rems
        self.split_pairs = split_pairs

    def links(self) -> list[tuple[str, str]]:
        return sorted(set(self._adds) | set(self._rems))

    def added(self, src: str, dst: str) -> LabelSet:
        return LabelSet(self._adds.get((src, dst), 0))

    def removed(self, src: str, dst: str) -> LabelSet:
        return LabelSet(self._rems.get((src, dst), 0))

    def changed_atoms(self) -> LabelSet:
        bits = 0
        for v in self._adds.values():
            bits |= v
        for v in self._rems.values():
            bits |= v
        return LabelSet(bits)

    def records(self) -> list[tuple[tuple[str, str], LabelSet, LabelSet]]:
        return [
            (link, self.added(*link), self.removed(*link)) for link in self.links()
        ]

    def __bool__(self) -> bool:
        return bool(self._adds or self._rems)

    def merge(self, other: "DeltaGraph") -> "DeltaGraph":
        """Compose with a later delta; cancelling changes net out."""
        adds, rems = {}, {}
        for link in set(self._adds) | set(self._rems) | set(other._adds) | set(other._rems):
            a1, r1 = self._adds.get(link, 0), self._rems.get(link, 0)
            a2, r2 = other._adds.get(link, 0), other._rems.get(link, 0)
            a = (a1 & ~r2) | (a2 & ~r1)
            r = (r1 & ~a2) | (r2 & ~a1)
            if a:
                adds[link] = a
            if r:
                rems[link] = r
        return DeltaGraph(adds, rems, self.split_pairs + other.split_pairs)


class Snapshot:
    """Opaque checkpoint of the full logical engine state."""

    __slots__ = ("_core_snap", "_names", "_rev", "_conflicts", "_backend")

    def __init__(self, core_snap, names, rev, conflicts, backend):
        self._core_snap = core_snap
        self._names = names
        self._rev = rev
        self._conflicts = conflicts
        self._backend = backend


class Engine:
    """Exact, incrementally maintained atom-labelled forwarding graph."""

    def __init__(self, k: int = 32, backend: str | None = None):
        module = _resolve_backend(backend, k)
        self.k = k
        self.backend = module.BACKEND_NAME
        self._core = module.EngineCore(k)
        self._names = {DROP: 0}
        self._rev = [DROP]
        self.priority_conflicts = 0  # warn-and-break tie policy, see insert_rule

    # -- node registry -----------------------------------------------------

    def node_id(self, name: str) -> int:
        nid = self._names.get(name)
        if nid is None:
            nid = len(self._rev)
            self._names[name] = nid
            self._rev.append(name)
        return nid

    def _known_node(self, name: str) -> int:
        nid = self._names.get(name)
        if nid is None:
            raise UnknownNode(f"unknown node {name!r}")
        return nid

    def node_name(self, nid: int) -> str:
        return self._rev[nid]

    def nodes(self) -> list[str]:
        return list(self._rev)

    # -- rule updates --------------------------------------------------------

    def insert_rule(self, rule: Rule) -> DeltaGraph:
        """Install ``rule`` and return the label changes it caused.

        Equal-priority overlaps at one node are resolved deterministically
        (larger rule id wins) and counted in ``priority_conflicts`` rather
        than rejected.
        """
        if self._core.has_rule(rule.rule_id):
            raise DuplicateRuleId(f"rule id {rule.rule_id} already installed")
        if rule.rule_id < 0:
            raise ValueError("rule ids must be non-negative")
        if rule.src == DROP:
            raise ValueError("the drop sink has no outgoing rules")
        if rule.src == rule.dst:
            raise ValueError(f"self-loop {rule.src} -> {rule.dst} is not a link")
        iv = rule.match
        if not 0 <= iv.lo < iv.hi <= (1 << self.k):
            raise ValueError(f"{iv} outside the {self.k}-bit space")
        src, dst = self.node_id(rule.src), self.node_id(rule.dst)
        delta, events, conflict = self._core.insert_rule(
            rule.rule_id, src, dst, rule.priority, iv.lo, iv.hi
        )
        if conflict:
            self.priority_conflicts += 1
        return self._delta_graph(events, list(delta))

    def remove_rule(self, rule_id: int) -> DeltaGraph:
        """Uninstall the rule and return the label changes (ownership may
        transfer to the next-highest rule per atom)."""
        if not self._core.has_rule(rule_id):
            raise UnknownRuleId(f"rule id {rule_id} is not installed")
        events = self._core.remove_rule(rule_id)
        return self._delta_graph(events, [])

    def _delta_graph(self, events, split_pairs) -> DeltaGraph:
        net = {}
        for li, atom, sign in events:
            key = (li, atom)
            if key in net:
                del net[key]  # flipped back within the same operation
            else:
                net[key] = sign
        adds, rems = {}, {}
        for (li, atom), sign in net.items():
            s, d = self._core.link_nodes(li)
            link = (self._rev[s], self._rev[d])
            target = adds if sign > 0 else rems
            target[link] = target.get(link, 0) | (1 << atom)
        return DeltaGraph(adds, rems, split_pairs)

    # -- rule / link queries ---------------------------------------------------

    def rule(self, rule_id: int) -> Rule:
        if not self._core.has_rule(rule_id):
            raise UnknownRuleId(f"rule id {rule_id} is not installed")
        src, dst, prio, lo, hi = self._core.rule_info(rule_id)
        return Rule(rule_id, self._rev[src], self._rev[dst], prio, Interval(lo, hi))

    def rules(self) -> list[Rule]:
        return [self.rule(rid) for rid in self._core.rule_ids()]

    def rule_count(self) -> int:
        return self._core.rule_count()

    def links(self) -> list[tuple[str, str]]:
        """Every link that has ever carried a rule, in registration order."""
        return [(self._rev[s], self._rev[d]) for s, d in self._core.links()]

    def rules_on_link(self, src: str, dst: str) -> list[Rule]:
        """The rules currently installed on one link."""
        s, d = self._names.get(src), self._names.get(dst)
        li = self._core.link_id(s, d) if s is not None and d is not None else None
        if li is None:
            raise UnknownLink(f"no rule ever used link {src} -> {dst}")
        return [self.rule(rid) for rid in self._core.rules_on_link(li)]

    def label_of(self, src: str, dst: str) -> LabelSet:
        """Current atom label of the link; direct lookup, never recomputed."""
        s, d = self._names.get(src), self._names.get(dst)
        li = self._core.link_id(s, d) if s is not None and d is not None else None
        if li is None:
            raise UnknownLink(f"no rule ever used link {src} -> {dst}")
        return LabelSet(self._core.label_bits(li))

    def owner_link(self, atom: int, node: str) -> tuple[str, str] | None:
        """Link of the highest-priority rule owning ``atom`` at ``node``."""
        top = self._core.owner_top(atom, self._known_node(node))
        if top is None:
            return None
        src, dst, _, _, _ = self._core.rule_info(top[1])
        return (self._rev[src], self._rev[dst])

    def owner_rule_id(self, atom: int, node: str) -> int | None:
        top = self._core.owner_top(atom, self._known_node(node))
        return None if top is None else top[1]

    # -- atom map surface ---------------------------------------------------

    def register_interval(self, iv: Interval) -> None:
        self._core.register_interval(iv.lo, iv.hi)

    def atoms_of(self, iv: Interval) -> list[int]:
        return self._core.atoms_of(iv.lo, iv.hi)

    def interval_of(self, atom: int) -> Interval:
        lo, hi = self._core.interval_of(atom)
        return Interval(lo, hi)

    def atom_at(self, addr: int) -> int:
        if not 0 <= addr < (1 << self.k):
            raise UnknownAtom(f"address {addr} outside the space")
        return self._core.atom_at(addr)

    def atom_count(self) -> int:
        return self._core.atom_count()

    def all_atoms(self) -> LabelSet:
        return LabelSet((1 << self._core.next_atom_id()) - 1)

    def atom_intervals(self, label: LabelSet) -> list[Interval]:
        return [self.interval_of(a) for a in label]

    # -- checkpoint / restore ----------------------------------------------------

    def checkpoint(self) -> Snapshot:
        """Capture the full logical state; restore() brings it back bit-exactly."""
        return Snapshot(
            self._core.snapshot(),
            dict(self._names),
            list(self._rev),
            self.priority_conflicts,
            self.backend,
        )

    def restore(self, snap: Snapshot) -> None:
        if snap._backend != self.backend:
            raise ValueError("snapshot was taken with a different backend")
        self._core.restore(snap._core_snap)
        self._names = dict(snap._names)
        self._rev = list(snap._rev)
        self.priority_conflicts = snap._conflicts

    # -- diagnostics ---------------------------------------------------------

    def dump(self) -> str:
        """Canonical per-link state: one sorted interval list per link."""
        lines = []
        for src, dst in sorted(self.links()):
            label = self.label_of(src, dst)
            ivs = ",".join(str(iv) for iv in sorted(self.atom_intervals(label)))
            lines.append(f"{src} -> {dst}: {ivs or '-'}")
        return "\n".join(lines) + "\n"

    def dump_atom_map(self) -> str:
        from .atoms import INF_ATOM

        lines = []
        for key, aid in self._core.dump_bounds():
            lines.append(f"{key}\t{'inf' if aid == INF_ATOM else aid}")
        return "\n".join(lines) + "\n"

    def memory_estimate(self) -> dict:
        est = self._core.memory_estimate()
        est["rule_count"] = self.rule_count()
        est["total_bytes"] = est["label_bytes"] + est["owner_bytes"]
        return est

    def check_coherence(self) -> list[str]:
        """Full sweep of the owner/label invariant; returns violations.

        For every source and live atom, the atom must sit on exactly the
        owning rule's link and on no other outgoing link of that source.
        Test-scale only: cost is atoms x sources x links.
        """
        problems = []
        out_links = {}
        for s, d in self._core.links():
            out_links.setdefault(s, []).append((s, d))
        sources = {self._core.rule_info(rid)[0] for rid in self._core.rule_ids()}
        for s in sources | set(out_links):
            for atom in range(self._core.next_atom_id()):
                top = self._core.owner_top(atom, s)
                expect = None
                if top is not None:
                    ri = self._core.rule_info(top[1])
                    expect = (ri[0], ri[1])
                for link in out_links.get(s, []):
                    li = self._core.link_id(*link)
                    has = self._core.label_test(li, atom)
                    if has != (link == expect):
                        problems.append(
                            f"atom {atom} at {self._rev[s]}: "
                            f"label({self._rev[link[0]]}->{self._rev[link[1]]})={has} "
                            f"but owner link is {expect and (self._rev[expect[0]], self._rev[expect[1]])}"
                        )
        return problems
