# distutils: language = c++
# cython: language_level=3, boundscheck=False, wraparound=False
"""Compiled engine core: C++ containers behind the same interface as
``_pycore.EngineCore``.

The bound map is a std::map (red-black tree), owner tables are a vector of
hash maps of priority-ordered std::sets, labels are raw uint64 word vectors.
Addresses are stored as uint64, so this core handles bit widths up to
MAX_K = 63; wider spaces fall back to the pure-Python core.

Container access sticks to chained index/iterator expressions: binding an
element to a local via address-of makes Cython materialise a temporary copy.
"""

from cython.operator cimport dereference as deref, preincrement as inc, predecrement as dec
from libc.stdint cimport int64_t, uint64_t
from libcpp.map cimport map as cpp_map
from libcpp.pair cimport pair
from libcpp.set cimport set as cpp_set
from libcpp.unordered_map cimport unordered_map
from libcpp.vector cimport vector

from .errors import BoundsNotRegistered, UnknownAtom

BACKEND_NAME = "compiled"
MAX_K = 63

DEF GROW_WORDS = 16  # labels grow in 1024-bit blocks

cdef int64_t INF_ID = (<int64_t>1 << 62) - 1 + (<int64_t>1 << 62)  # 2**63 - 1

ctypedef pair[int64_t, int64_t] PrioRule
ctypedef cpp_set[PrioRule] RuleSet
ctypedef unordered_map[int, RuleSet] OwnerMap
ctypedef cpp_map[uint64_t, int64_t] BoundMap

cdef struct RuleRec:
    int src
    int dst
    int64_t prio
    uint64_t lo
    uint64_t hi
    int link


cdef class EngineCore:
    cdef public int k
    cdef uint64_t _max_addr
    cdef BoundMap _bounds
    cdef vector[uint64_t] _atom_key          # atom id -> its lower-bound key
    cdef int64_t _next_id
    cdef vector[OwnerMap] _owner
    cdef unordered_map[uint64_t, int] _links  # (src << 32 | dst) -> index
    cdef vector[pair[int, int]] _link_list
    cdef vector[vector[uint64_t]] _labels
    cdef unordered_map[int64_t, RuleRec] _rules

    def __init__(self, int k):
        if not 1 <= k <= MAX_K:
            raise ValueError(f"compiled core supports 1 <= k <= {MAX_K}, got {k}")
        self.k = k
        self._max_addr = (<uint64_t>1) << k
        self._bounds[0] = 0
        self._bounds[self._max_addr] = INF_ID
        self._atom_key.push_back(0)
        self._next_id = 1
        self._owner.resize(1)

    # -- label bit primitives (return True only on a real flip) ---------------

    cdef bint _label_add(self, int li, int64_t atom):
        cdef size_t word = <size_t>(atom >> 6)
        cdef uint64_t mask = (<uint64_t>1) << (atom & 63)
        if word >= self._labels[li].size():
            self._labels[li].resize(((word // GROW_WORDS) + 1) * GROW_WORDS, 0)
        elif self._labels[li][word] & mask:
            return False
        self._labels[li][word] |= mask
        return True

    cdef bint _label_clear(self, int li, int64_t atom):
        cdef size_t word = <size_t>(atom >> 6)
        cdef uint64_t mask = (<uint64_t>1) << (atom & 63)
        if word >= self._labels[li].size() or not self._labels[li][word] & mask:
            return False
        self._labels[li][word] &= ~mask
        return True

    cdef bint _label_has(self, int li, int64_t atom):
        cdef size_t word = <size_t>(atom >> 6)
        if word >= self._labels[li].size():
            return False
        return (self._labels[li][word] >> (atom & 63)) & 1

    cdef int _link_index(self, int src, int dst):
        cdef uint64_t key = ((<uint64_t>src) << 32) | <uint64_t>dst
        cdef unordered_map[uint64_t, int].iterator it = self._links.find(key)
        if it != self._links.end():
            return deref(it).second
        cdef int li = <int>self._link_list.size()
        self._links[key] = li
        self._link_list.push_back(pair[int, int](src, dst))
        self._labels.push_back(vector[uint64_t]())
        return li

    # -- bound registration -----------------------------------------------------

    cdef int _register(self, uint64_t bound, int64_t* old_out):
        # returns 1 and writes the split atom id when a new key was inserted
        cdef BoundMap.iterator it = self._bounds.lower_bound(bound)
        if deref(it).first == bound:
            return 0
        dec(it)
        old_out[0] = deref(it).second
        cdef int64_t new_id = self._next_id
        self._next_id += 1
        self._bounds[bound] = new_id
        self._atom_key.push_back(bound)
        self._owner.resize(<size_t>self._next_id)
        return 1

    # -- rule operations -----------------------------------------------------------

    def insert_rule(self, int64_t rid, int src, int dst, int64_t prio,
                    uint64_t lo, uint64_t hi):
        """Install a rule; returns (delta_pairs, flip_events, conflict_flag)."""
        cdef list delta = []
        cdef list events = []
        cdef int64_t old_id = 0
        cdef int64_t new_id, atom
        cdef int li_o, b
        cdef uint64_t bound
        cdef OwnerMap.iterator oit
        for b in range(2):
            bound = lo if b == 0 else hi
            if self._register(bound, &old_id):
                new_id = self._next_id - 1
                delta.append((old_id, new_id))
                if self._owner[<size_t>old_id].size() > 0:
                    # the new atom inherits the split atom's owners everywhere
                    self._owner[<size_t>new_id] = self._owner[<size_t>old_id]
                    oit = self._owner[<size_t>old_id].begin()
                    while oit != self._owner[<size_t>old_id].end():
                        li_o = self._rules[deref(deref(oit).second.rbegin()).second].link
                        if self._label_add(li_o, new_id):
                            events.append((li_o, new_id, 1))
                        inc(oit)
        cdef int li_r = self._link_index(src, dst)
        cdef PrioRule key = PrioRule(prio, rid)
        cdef PrioRule top
        cdef bint conflict = False
        cdef bint has_top
        cdef RuleSet.iterator sit
        cdef OwnerMap.iterator tit
        cdef BoundMap.iterator it = self._bounds.find(lo)
        while deref(it).first != hi:
            atom = deref(it).second
            tit = self._owner[<size_t>atom].find(src)
            has_top = tit != self._owner[<size_t>atom].end() and deref(tit).second.size() > 0
            if has_top:
                top = deref(deref(tit).second.rbegin())
            if not has_top or top < key:
                if self._label_add(li_r, atom):
                    events.append((li_r, atom, 1))
                if has_top:
                    li_o = self._rules[top.second].link
                    if li_o != li_r and self._label_clear(li_o, atom):
                        events.append((li_o, atom, -1))
            if has_top and not conflict:
                sit = deref(tit).second.lower_bound(PrioRule(prio, -1))
                if sit != deref(tit).second.end() and deref(sit).first == prio:
                    conflict = True
            if has_top:
                deref(tit).second.insert(key)
            else:
                self._owner[<size_t>atom][src].insert(key)
            inc(it)
        cdef RuleRec rec
        rec.src = src
        rec.dst = dst
        rec.prio = prio
        rec.lo = lo
        rec.hi = hi
        rec.link = li_r
        self._rules[rid] = rec
        return delta, events, conflict

    def remove_rule(self, int64_t rid):
        """Uninstall a rule; returns the flip events."""
        cdef unordered_map[int64_t, RuleRec].iterator rit = self._rules.find(rid)
        cdef RuleRec rec = deref(rit).second
        self._rules.erase(rit)
        cdef list events = []
        cdef PrioRule key = PrioRule(rec.prio, rid)
        cdef PrioRule top
        cdef int64_t atom
        cdef int li_n
        cdef bint emptied
        cdef OwnerMap.iterator tit
        cdef BoundMap.iterator it = self._bounds.find(rec.lo)
        while deref(it).first != rec.hi:
            atom = deref(it).second
            tit = self._owner[<size_t>atom].find(rec.src)
            top = deref(deref(tit).second.rbegin())
            deref(tit).second.erase(key)
            emptied = deref(tit).second.size() == 0
            if top == key:
                if self._label_clear(rec.link, atom):
                    events.append((rec.link, atom, -1))
                if not emptied:
                    li_n = self._rules[deref(deref(tit).second.rbegin()).second].link
                    if self._label_add(li_n, atom):
                        events.append((li_n, atom, 1))
            if emptied:
                self._owner[<size_t>atom].erase(tit)
            inc(it)
        return events

    # -- queries ------------------------------------------------------------------

    def has_rule(self, int64_t rid):
        return self._rules.find(rid) != self._rules.end()

    def rule_info(self, int64_t rid):
        cdef unordered_map[int64_t, RuleRec].iterator it = self._rules.find(rid)
        cdef RuleRec rec = deref(it).second
        return rec.src, rec.dst, rec.prio, rec.lo, rec.hi

    def rule_ids(self):
        cdef list out = []
        cdef unordered_map[int64_t, RuleRec].iterator it = self._rules.begin()
        while it != self._rules.end():
            out.append(deref(it).first)
            inc(it)
        return out

    def rules_on_link(self, int li):
        cdef list out = []
        cdef unordered_map[int64_t, RuleRec].iterator it = self._rules.begin()
        while it != self._rules.end():
            if deref(it).second.link == li:
                out.append(deref(it).first)
            inc(it)
        return out

    def rule_count(self):
        return self._rules.size()

    def link_id(self, src, dst):
        if src is None or dst is None:
            return None
        cdef uint64_t key = ((<uint64_t><int>src) << 32) | <uint64_t><int>dst
        cdef unordered_map[uint64_t, int].iterator it = self._links.find(key)
        if it == self._links.end():
            return None
        return deref(it).second

    def link_nodes(self, int li):
        return self._link_list[li].first, self._link_list[li].second

    def link_count(self):
        return self._link_list.size()

    def links(self):
        cdef list out = []
        cdef size_t i
        for i in range(self._link_list.size()):
            out.append((self._link_list[i].first, self._link_list[i].second))
        return out

    def label_bits(self, int li):
        if self._labels[li].size() == 0:
            return 0
        cdef const unsigned char* p = <const unsigned char*>self._labels[li].data()
        return int.from_bytes(p[:self._labels[li].size() * 8], "little")

    def label_test(self, int li, int64_t atom):
        return bool(self._label_has(li, atom))

    def links_carrying(self, atoms):
        """(link index, mask) for every link whose label meets ``atoms``."""
        cdef list out = []
        cdef vector[int64_t] ids
        for a in atoms:
            ids.push_back(<int64_t>a)
        cdef size_t li, j
        cdef int64_t a_id
        cdef object mask, one = 1
        for li in range(self._link_list.size()):
            mask = 0
            for j in range(ids.size()):
                a_id = ids[j]
                if self._label_has(<int>li, a_id):
                    mask = mask | (one << a_id)
            if mask:
                out.append((li, mask))
        return out

    def owner_top(self, int64_t atom, int source):
        if atom >= <int64_t>self._owner.size():
            return None
        cdef OwnerMap.iterator it = self._owner[<size_t>atom].find(source)
        if it == self._owner[<size_t>atom].end() or deref(it).second.size() == 0:
            return None
        cdef PrioRule top = deref(deref(it).second.rbegin())
        return top.first, top.second

    def owner_sources(self, int64_t atom):
        cdef list out = []
        if atom >= <int64_t>self._owner.size():
            return out
        cdef OwnerMap.iterator it = self._owner[<size_t>atom].begin()
        while it != self._owner[<size_t>atom].end():
            if deref(it).second.size() > 0:
                out.append(deref(it).first)
            inc(it)
        return out

    # -- atom map surface ------------------------------------------------------------

    def register_interval(self, uint64_t lo, uint64_t hi):
        cdef int64_t old_id
        self._register(lo, &old_id)
        self._register(hi, &old_id)

    def atoms_of(self, uint64_t lo, uint64_t hi):
        cdef BoundMap.iterator it = self._bounds.find(lo)
        if it == self._bounds.end():
            raise BoundsNotRegistered(f"lower bound {lo} is not a key")
        cdef list out = []
        while deref(it).first != hi:
            out.append(deref(it).second)
            inc(it)
            if it == self._bounds.end():
                raise BoundsNotRegistered(f"upper bound {hi} is not a key")
        return out

    def interval_of(self, int64_t atom):
        if not 0 <= atom < self._next_id:
            raise UnknownAtom(f"atom {atom} was never issued")
        cdef uint64_t key = self._atom_key[<size_t>atom]
        cdef BoundMap.iterator it = self._bounds.find(key)
        inc(it)
        return key, deref(it).first

    def atom_at(self, uint64_t addr):
        cdef BoundMap.iterator it = self._bounds.upper_bound(addr)
        dec(it)
        return deref(it).second

    def atom_count(self):
        return self._bounds.size() - 1

    def next_atom_id(self):
        return self._next_id

    def dump_bounds(self):
        cdef list out = []
        cdef BoundMap.iterator it = self._bounds.begin()
        while it != self._bounds.end():
            out.append((deref(it).first, deref(it).second))
            inc(it)
        return out

    # -- snapshot / restore -------------------------------------------------------------

    def snapshot(self):
        cdef EngineCore clone = EngineCore.__new__(EngineCore)
        clone.k = self.k
        clone._max_addr = self._max_addr
        clone._bounds = self._bounds
        clone._atom_key = self._atom_key
        clone._next_id = self._next_id
        clone._owner = self._owner
        clone._links = self._links
        clone._link_list = self._link_list
        clone._labels = self._labels
        clone._rules = self._rules
        return clone

    def restore(self, snap):
        cdef EngineCore other = <EngineCore?>snap
        self.k = other.k
        self._max_addr = other._max_addr
        self._bounds = other._bounds
        self._atom_key = other._atom_key
        self._next_id = other._next_id
        self._owner = other._owner
        self._links = other._links
        self._link_list = other._link_list
        self._labels = other._labels
        self._rules = other._rules

    def memory_estimate(self):
        cdef size_t label_bytes = 0
        cdef size_t entries = 0
        cdef size_t tables = 0
        cdef size_t i
        cdef OwnerMap.iterator it
        for i in range(self._labels.size()):
            label_bytes += self._labels[i].size() * 8
        for i in range(self._owner.size()):
            it = self._owner[i].begin()
            while it != self._owner[i].end():
                tables += 1
                entries += deref(it).second.size()
                inc(it)
        return {
            "label_bytes": label_bytes,
            "owner_entries": entries,
            # std::set node: two pointers + colour + payload; hash slot ~64B
            "owner_bytes": entries * 48 + tables * 64,
            "bound_count": self._bounds.size(),
        }
