"""Exception hierarchy shared across the package.

Every error raised on a user-facing path derives from :class:`DeltaNetError`
so the CLI can map all input problems to a single exit code.
"""


class DeltaNetError(Exception):
    """Base class for all errors raised by this package."""


class MalformedPrefix(DeltaNetError):
    """Prefix text or value is not a canonical prefix for the address space."""

    def __init__(self, message: str, offset: int = 0):
        super().__init__(message)
        self.offset = offset


class BoundsNotRegistered(DeltaNetError):
    """An interval bound was queried before being registered in the atom map."""


class UnknownAtom(DeltaNetError):
    """Atom id is not live in the atom map (or is the end-of-space sentinel)."""


class DuplicateRuleId(DeltaNetError):
    """A rule with this id is already installed."""


class UnknownRuleId(DeltaNetError):
    """No installed rule carries this id."""


class UnknownLink(DeltaNetError):
    """The link has never carried a rule in this engine."""


class UnknownNode(DeltaNetError):
    """Node name was never registered with the engine."""


class MalformedTrace(DeltaNetError):
    """Syntax or consistency error in a trace or topology file."""

    def __init__(self, message: str, line: int = 0, column: int = 0):
        super().__init__(f"line {line}: {message}" if line else message)
        self.line = line
        self.column = column


class DanglingDelete(MalformedTrace):
    """A del operation names a rule id that is not currently installed."""
