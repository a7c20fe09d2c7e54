"""CIDR prefixes as half-closed intervals over a k-bit address space.

A prefix ``base/len`` over a ``k``-bit space covers the addresses
``[base : base + 2**(k - len))``. The bit width is configurable so tests can
use tiny spaces (k=4, k=8) where exhaustive enumeration is feasible; k=32 is
the default and uses the familiar dotted-quad text form. For any other k the
text form is ``<decimal-base>/<len>``.

Prefixes must be canonical: all bits of ``base`` below position ``k - len``
must be zero. Non-canonical input is rejected rather than silently masked,
so dataset bugs surface early.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import MalformedPrefix

__all__ = [
    "AddressSpace",
    "Interval",
    "IpPrefix",
    "parse_prefix",
    "format_prefix",
    "prefix_to_interval",
]


@dataclass(frozen=True)
class AddressSpace:
    """A fixed k-bit address space; addresses live in [0, 2**k)."""

    k: int = 32

    def __post_init__(self):
        if not 1 <= self.k <= 128:
            raise ValueError(f"bit width must be in [1, 128], got {self.k}")

    @property
    def min_addr(self) -> int:
        return 0

    @property
    def max_addr(self) -> int:
        return 1 << self.k


@dataclass(frozen=True, order=True)
class Interval:
    """Half-closed address range [lo : hi)."""

    lo: int
    hi: int

    def __post_init__(self):
        if self.lo < 0 or self.lo >= self.hi:
            raise ValueError(f"invalid interval [{self.lo}:{self.hi})")

    @property
    def width(self) -> int:
        return self.hi - self.lo

    def __contains__(self, addr: int) -> bool:
        return self.lo <= addr < self.hi

    def overlaps(self, other: "Interval") -> bool:
        return self.lo < other.hi and other.lo < self.hi

    def __str__(self) -> str:
        return f"[{self.lo}:{self.hi})"


@dataclass(frozen=True)
class IpPrefix:
    """A canonical prefix: ``base`` with the low ``k - length`` bits clear."""

    base: int
    length: int


def prefix_to_interval(p: IpPrefix, space: AddressSpace) -> Interval:
    """Return the half-closed interval covered by prefix ``p``.

    Raises MalformedPrefix if the prefix is non-canonical or does not fit
    the address space.
    """
    _check_prefix(p, space)
    return Interval(p.base, p.base + (1 << (space.k - p.length)))


def _check_prefix(p: IpPrefix, space: AddressSpace) -> None:
    if not 0 <= p.length <= space.k:
        raise MalformedPrefix(f"prefix length {p.length} outside [0, {space.k}]")
    if not 0 <= p.base < space.max_addr:
        raise MalformedPrefix(f"base {p.base} outside the {space.k}-bit space")
    low_bits = (1 << (space.k - p.length)) - 1
    if p.base & low_bits:
        raise MalformedPrefix(
            f"non-canonical prefix: base {p.base} has bits set below position "
            f"{space.k - p.length}"
        )


def parse_prefix(text: str, space: AddressSpace = AddressSpace(32)) -> IpPrefix:
    """Parse prefix text into a canonical :class:`IpPrefix`.

    Accepts ``A.B.C.D/len`` when k=32 and ``<decimal-base>/<len>`` for any k.
    Raises MalformedPrefix with the byte offset of the offending token.
    """
    slash = text.find("/")
    if slash < 0:
        raise MalformedPrefix(f"missing '/' in prefix {text!r}", offset=len(text))
    base_text, len_text = text[:slash], text[slash + 1 :]
    length = _parse_uint(len_text, "prefix length", offset=slash + 1)
    if length > space.k:
        raise MalformedPrefix(
            f"prefix length {length} exceeds bit width {space.k}", offset=slash + 1
        )
    if "." in base_text:
        if space.k != 32:
            raise MalformedPrefix(
                f"dotted-quad base requires a 32-bit space, not k={space.k}", offset=0
            )
        base = _parse_dotted_quad(base_text)
    else:
        base = _parse_uint(base_text, "base address", offset=0)
    p = IpPrefix(base, length)
    _check_prefix(p, space)
    return p


def format_prefix(p: IpPrefix, space: AddressSpace) -> str:
    """Render a prefix in its canonical text form (inverse of parse_prefix)."""
    _check_prefix(p, space)
    if space.k == 32:
        octets = [(p.base >> shift) & 0xFF for shift in (24, 16, 8, 0)]
        return f"{octets[0]}.{octets[1]}.{octets[2]}.{octets[3]}/{p.length}"
    return f"{p.base}/{p.length}"


def _parse_uint(text: str, what: str, offset: int) -> int:
    if not text or not text.isascii() or not text.isdigit():
        raise MalformedPrefix(f"{what} must be a decimal integer, got {text!r}", offset)
    return int(text)


def _parse_dotted_quad(text: str) -> int:
    parts = text.split(".")
    if len(parts) != 4:
        raise MalformedPrefix(f"expected four dotted octets, got {text!r}", offset=0)
    value = 0
    offset = 0
    for part in parts:
        if not part.isascii() or not part.isdigit() or not 0 <= int(part) <= 255:
            raise MalformedPrefix(f"bad octet {part!r}", offset=offset)
        value = (value << 8) | int(part)
        offset += len(part) + 1
    return value
