"""Immutable sets of atom ids, backed by a single Python integer bitmask.

The engine cores keep their own mutable bit storage per link; this wrapper is
the snapshot form handed to callers and used by the analysis algorithms,
where whole-set AND/OR/DIFF are single big-int operations.
"""

from __future__ import annotations

from typing import Iterable, Iterator

__all__ = ["LabelSet"]


class LabelSet:
    """Frozen set of non-negative atom ids."""

    __slots__ = ("bits",)

    def __init__(self, bits: int = 0):
        if bits < 0:
            raise ValueError("bitmask must be non-negative")
        object.__setattr__(self, "bits", bits)

    @classmethod
    def from_atoms(cls, atoms: Iterable[int]) -> "LabelSet":
        bits = 0
        for a in atoms:
            bits |= 1 << a
        return cls(bits)

    def __setattr__(self, name, value):
        raise AttributeError("LabelSet is immutable")

    def __contains__(self, atom: int) -> bool:
        return atom >= 0 and (self.bits >> atom) & 1 == 1

    def __iter__(self) -> Iterator[int]:
        v = self.bits
        while v:
            low = v & -v
            yield low.bit_length() - 1
            v ^= low

    def __len__(self) -> int:
        return self.bits.bit_count()

    def __bool__(self) -> bool:
        return self.bits != 0

    def __eq__(self, other) -> bool:
        return isinstance(other, LabelSet) and self.bits == other.bits

    def __hash__(self) -> int:
        return hash(self.bits)

    def __and__(self, other: "LabelSet") -> "LabelSet":
        return LabelSet(self.bits & other.bits)

    def __or__(self, other: "LabelSet") -> "LabelSet":
        return LabelSet(self.bits | other.bits)

    def __sub__(self, other: "LabelSet") -> "LabelSet":
        return LabelSet(self.bits & ~other.bits)

    def isdisjoint(self, other: "LabelSet") -> bool:
        return self.bits & other.bits == 0

    def __repr__(self) -> str:
        return f"LabelSet({{{', '.join(map(str, self))}}})"
