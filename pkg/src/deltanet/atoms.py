"""The global interval segmentation: an ordered bound map issuing atom ids.

Rule intervals over the address space are segmented into *atoms*: maximal
half-closed intervals not split by any registered bound. The map stores
``bound -> atom id`` pairs in key order; the atom for a key is the range up
to the next greater key. 0 and 2**k are always present, so the live atoms
always partition the whole space. Ids come from a counter starting at zero
and are never reused; registering new bounds only ever splits existing atoms
(the old id keeps the lower part, a fresh id takes the upper part), so an
id's interval can shrink but never moves or grows.

Bounds are never garbage-collected: removing rules elsewhere leaves the
segmentation untouched. That trades memory for strictly monotone ids, which
the engine relies on for array indexing.
"""

from __future__ import annotations

from bisect import bisect_left, bisect_right
from typing import NamedTuple

from .errors import BoundsNotRegistered, UnknownAtom
from .prefix import AddressSpace, Interval

__all__ = ["INF_ATOM", "AtomMap", "DeltaPair"]

# Sentinel id mapped to the 2**k key; greater than any issued id, never
# denotes an interval and never appears in labels.
INF_ATOM = (1 << 63) - 1


class DeltaPair(NamedTuple):
    """One atom split: ``new`` now denotes the upper part of ``old``'s range."""

    old: int
    new: int


class AtomMap:
    """Ordered map from interval bounds to dense atom identifiers."""

    __slots__ = ("space", "_keys", "_ids", "_key_of_atom", "next_id")

    def __init__(self, space: AddressSpace):
        self.space = space
        self._keys = [0, space.max_addr]
        self._ids = [0, INF_ATOM]
        self._key_of_atom = [0]  # atom id -> its lower bound key
        self.next_id = 1

    # -- registration ----------------------------------------------------

    def create_atoms(self, iv: Interval) -> None:
        """Ensure both bounds of ``iv`` are keys; idempotent."""
        self.create_atoms_plus(iv)

    def create_atoms_plus(self, iv: Interval) -> list[DeltaPair]:
        """Register ``iv``'s bounds and report the splits they caused.

        Each genuinely new key lands strictly inside an existing atom and
        splits it, producing one delta-pair; at most two pairs per call.
        """
        if not 0 <= iv.lo < iv.hi <= self.space.max_addr:
            raise ValueError(f"{iv} outside the {self.space.k}-bit space")
        delta = []
        for bound in (iv.lo, iv.hi):
            pair = self._register(bound)
            if pair is not None:
                delta.append(pair)
        return delta

    def _register(self, bound: int) -> DeltaPair | None:
        keys = self._keys
        pos = bisect_left(keys, bound)
        if keys[pos] == bound:
            return None
        old = self._ids[pos - 1]
        new = self.next_id
        self.next_id += 1
        keys.insert(pos, bound)
        self._ids.insert(pos, new)
        self._key_of_atom.append(bound)
        return DeltaPair(old, new)

    # -- queries ----------------------------------------------------------

    def atoms_of(self, iv: Interval) -> list[int]:
        """Atom ids covering ``iv``, in ascending interval order.

        Both bounds must already be registered (call create_atoms first).
        """
        lo_pos = bisect_left(self._keys, iv.lo)
        if self._keys[lo_pos] != iv.lo:
            raise BoundsNotRegistered(f"lower bound {iv.lo} is not a key")
        hi_pos = bisect_left(self._keys, iv.hi, lo=lo_pos)
        if self._keys[hi_pos] != iv.hi:
            raise BoundsNotRegistered(f"upper bound {iv.hi} is not a key")
        return self._ids[lo_pos:hi_pos]

    def interval_of(self, atom: int) -> Interval:
        """The half-closed interval currently denoted by ``atom``."""
        if not 0 <= atom < self.next_id:
            raise UnknownAtom(f"atom {atom} was never issued")
        key = self._key_of_atom[atom]
        pos = bisect_left(self._keys, key)
        return Interval(key, self._keys[pos + 1])

    def atom_at(self, addr: int) -> int:
        """Id of the atom whose interval contains ``addr``."""
        if not 0 <= addr < self.space.max_addr:
            raise UnknownAtom(f"address {addr} outside the space")
        return self._ids[bisect_right(self._keys, addr) - 1]

    @property
    def atom_count(self) -> int:
        return len(self._keys) - 1

    def live_atoms(self) -> list[int]:
        """All issued ids, i.e. 0..next_id-1 (ids are never reclaimed)."""
        return list(range(self.next_id))

    def intervals(self) -> list[Interval]:
        """The current partition of the space, in address order."""
        return [Interval(a, b) for a, b in zip(self._keys, self._keys[1:])]

    def dump(self) -> str:
        """Ordered ``key<TAB>atom_id`` lines; the end-of-space row prints 'inf'."""
        lines = []
        for key, aid in zip(self._keys, self._ids):
            lines.append(f"{key}\t{'inf' if aid == INF_ATOM else aid}")
        return "\n".join(lines) + "\n"

    def copy(self) -> "AtomMap":
        m = AtomMap.__new__(AtomMap)
        m.space = self.space
        m._keys = self._keys.copy()
        m._ids = self._ids.copy()
        m._key_of_atom = self._key_of_atom.copy()
        m.next_id = self.next_id
        return m

    # -- raw integer variants used by the pure-Python engine core ---------

    def register_raw(self, lo: int, hi: int) -> list[DeltaPair]:
        delta = []
        for bound in (lo, hi):
            pair = self._register(bound)
            if pair is not None:
                delta.append(pair)
        return delta

    def atoms_between_raw(self, lo: int, hi: int) -> list[int]:
        lo_pos = bisect_left(self._keys, lo)
        hi_pos = bisect_left(self._keys, hi, lo=lo_pos)
        return self._ids[lo_pos:hi_pos]
