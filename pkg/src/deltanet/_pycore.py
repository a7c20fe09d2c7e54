"""Pure-Python engine core: the fallback backend.

Holds the mutable network state (atom map, per-link label bitsets, per-atom
owner tables, rule store) and implements rule insertion and removal. The
compiled core in ``_ccore`` implements the same interface with identical
semantics; ``engine.Engine`` picks one at construction.

Interface conventions: nodes and links are small ints assigned by the
facade, rule ids / priorities are Python ints, label change events are
``(link_index, atom, +1|-1)`` tuples listing exact bit flips in order.
"""

from __future__ import annotations

from bisect import bisect_left, insort

from .atoms import AtomMap
from .prefix import AddressSpace

BACKEND_NAME = "python"
MAX_K = 128

_GROW_BYTES = 128  # label bitsets grow in 1024-bit blocks


class EngineCore:
    __slots__ = ("k", "amap", "_links", "_link_list", "_labels", "_owner", "_rules")

    def __init__(self, k: int):
        self.k = k
        self.amap = AtomMap(AddressSpace(k))
        self._links = {}  # (src, dst) -> link index
        self._link_list = []  # link index -> (src, dst)
        self._labels = []  # link index -> bytearray bitset
        self._owner = [{}]  # atom id -> {source: sorted [(prio, rid), ...]}
        self._rules = {}  # rid -> (src, dst, prio, lo, hi, link index)

    # -- label bit primitives (return True only on a real flip) -----------

    def _label_add(self, li: int, atom: int) -> bool:
        buf = self._labels[li]
        byte = atom >> 3
        if byte >= len(buf):
            buf.extend(b"\0" * (_GROW_BYTES * (byte // _GROW_BYTES + 1) - len(buf)))
        mask = 1 << (atom & 7)
        if buf[byte] & mask:
            return False
        buf[byte] |= mask
        return True

    def _label_clear(self, li: int, atom: int) -> bool:
        buf = self._labels[li]
        byte = atom >> 3
        if byte >= len(buf) or not buf[byte] & (1 << (atom & 7)):
            return False
        buf[byte] &= ~(1 << (atom & 7))
        return True

    def _link_index(self, src: int, dst: int) -> int:
        li = self._links.get((src, dst))
        if li is None:
            li = len(self._link_list)
            self._links[(src, dst)] = li
            self._link_list.append((src, dst))
            self._labels.append(bytearray())
        return li

    def _grow_owner(self):
        owner = self._owner
        while len(owner) < self.amap.next_id:
            owner.append({})

    # -- rule operations ---------------------------------------------------

    def insert_rule(self, rid, src, dst, prio, lo, hi):
        """Install a rule; returns (delta_pairs, flip_events, conflict_flag)."""
        events = []
        rules = self._rules
        delta = self.amap.register_raw(lo, hi)
        self._grow_owner()
        owner = self._owner
        for old, new in delta:
            table = owner[old]
            if table:
                # the new atom inherits the split atom's owners everywhere
                owner[new] = {s: lst.copy() for s, lst in table.items()}
                for lst in table.values():
                    li = rules[lst[-1][1]][5]
                    if self._label_add(li, new):
                        events.append((li, new, 1))
        li_r = self._link_index(src, dst)
        key = (prio, rid)
        conflict = False
        for atom in self.amap.atoms_between_raw(lo, hi):
            table = owner[atom]
            lst = table.get(src)
            if lst is None:
                lst = table[src] = []
            top = lst[-1] if lst else None
            if top is None or top < key:
                if self._label_add(li_r, atom):
                    events.append((li_r, atom, 1))
                if top is not None:
                    li_o = rules[top[1]][5]
                    if li_o != li_r and self._label_clear(li_o, atom):
                        events.append((li_o, atom, -1))
            if not conflict and lst:
                pos = bisect_left(lst, (prio, -1))
                if pos < len(lst) and lst[pos][0] == prio:
                    conflict = True
            insort(lst, key)
        rules[rid] = (src, dst, prio, lo, hi, li_r)
        return delta, events, conflict

    def remove_rule(self, rid):
        """Uninstall a rule; returns the flip events."""
        src, dst, prio, lo, hi, li_r = self._rules.pop(rid)
        events = []
        rules = self._rules
        key = (prio, rid)
        for atom in self.amap.atoms_between_raw(lo, hi):
            table = self._owner[atom]
            lst = table[src]
            top = lst[-1]
            del lst[bisect_left(lst, key)]
            if not lst:
                del table[src]
            if top == key:
                if self._label_clear(li_r, atom):
                    events.append((li_r, atom, -1))
                if lst:
                    li_n = rules[lst[-1][1]][5]
                    if self._label_add(li_n, atom):
                        events.append((li_n, atom, 1))
        return events

    # -- queries -----------------------------------------------------------

    def has_rule(self, rid) -> bool:
        return rid in self._rules

    def rule_info(self, rid):
        return self._rules[rid][:5]

    def rule_ids(self):
        return list(self._rules)

    def rules_on_link(self, li: int):
        return [rid for rid, rec in self._rules.items() if rec[5] == li]

    def rule_count(self) -> int:
        return len(self._rules)

    def link_id(self, src, dst):
        return self._links.get((src, dst))

    def link_nodes(self, li: int):
        return self._link_list[li]

    def link_count(self) -> int:
        return len(self._link_list)

    def links(self):
        return list(self._link_list)

    def label_bits(self, li: int) -> int:
        return int.from_bytes(self._labels[li], "little")

    def label_test(self, li: int, atom: int) -> bool:
        buf = self._labels[li]
        byte = atom >> 3
        return byte < len(buf) and bool(buf[byte] & (1 << (atom & 7)))

    def links_carrying(self, atoms):
        """(link index, mask) for every link whose label meets ``atoms``."""
        out = []
        for li in range(len(self._link_list)):
            mask = 0
            for a in atoms:
                if self.label_test(li, a):
                    mask |= 1 << a
            if mask:
                out.append((li, mask))
        return out

    def owner_top(self, atom: int, source: int):
        """(priority, rule id) of the owning rule, or None."""
        if atom >= len(self._owner):
            return None
        lst = self._owner[atom].get(source)
        return lst[-1] if lst else None

    def owner_sources(self, atom: int):
        if atom >= len(self._owner):
            return []
        return list(self._owner[atom])

    # -- atom map surface (mirrors the compiled core) -----------------------

    def register_interval(self, lo, hi):
        self.amap.register_raw(lo, hi)
        self._grow_owner()

    def atoms_of(self, lo, hi):
        return self.amap.atoms_between_raw(lo, hi)

    def interval_of(self, atom):
        iv = self.amap.interval_of(atom)
        return iv.lo, iv.hi

    def atom_at(self, addr):
        return self.amap.atom_at(addr)

    def atom_count(self) -> int:
        return self.amap.atom_count

    def next_atom_id(self) -> int:
        return self.amap.next_id

    def dump_bounds(self):
        return list(zip(self.amap._keys, self.amap._ids))

    # -- snapshot / restore --------------------------------------------------

    def snapshot(self):
        return (
            self.amap.copy(),
            dict(self._links),
            list(self._link_list),
            [bytearray(b) for b in self._labels],
            [{s: lst.copy() for s, lst in table.items()} for table in self._owner],
            dict(self._rules),
        )

    def restore(self, snap):
        amap, links, link_list, labels, owner, rules = snap
        self.amap = amap.copy()
        self._links = dict(links)
        self._link_list = list(link_list)
        self._labels = [bytearray(b) for b in labels]
        self._owner = [{s: lst.copy() for s, lst in table.items()} for table in owner]
        self._rules = dict(rules)

    def memory_estimate(self) -> dict:
        owner_entries = sum(len(lst) for table in self._owner for lst in table.values())
        return {
            "label_bytes": sum(len(b) for b in self._labels),
            "owner_entries": owner_entries,
            "owner_bytes": owner_entries * 16 + sum(len(t) * 64 for t in self._owner),
            "bound_count": len(self.amap._keys),
        }
