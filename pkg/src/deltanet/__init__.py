"""deltanet: incremental data-plane verification over an atom-labelled graph.

The engine keeps one edge-labelled directed graph describing the flow of
every packet in the network, exact under rule insertions and removals, and
answers loop, reachability, all-pairs and link-failure what-if queries on
top of it. See README.md for the CLI and file formats.
"""

from .atoms import INF_ATOM, AtomMap, DeltaPair
from .engine import DROP, DeltaGraph, Engine, Rule, Snapshot, available_backends
from .errors import (
    BoundsNotRegistered,
    DanglingDelete,
    DeltaNetError,
    DuplicateRuleId,
    MalformedPrefix,
    MalformedTrace,
    UnknownAtom,
    UnknownLink,
    UnknownNode,
    UnknownRuleId,
)
from .labels import LabelSet
from .prefix import AddressSpace, Interval, IpPrefix, format_prefix, parse_prefix, prefix_to_interval

__version__ = "0.1.0"

__all__ = [
    "AddressSpace",
    "AtomMap",
    "BoundsNotRegistered",
    "DanglingDelete",
    "DeltaGraph",
    "DeltaNetError",
    "DeltaPair",
    "DROP",
    "DuplicateRuleId",
    "Engine",
    "INF_ATOM",
    "Interval",
    "IpPrefix",
    "LabelSet",
    "MalformedPrefix",
    "MalformedTrace",
    "Rule",
    "Snapshot",
    "UnknownAtom",
    "UnknownLink",
    "UnknownNode",
    "UnknownRuleId",
    "available_backends",
    "format_prefix",
    "parse_prefix",
    "prefix_to_interval",
    "__version__",
]
