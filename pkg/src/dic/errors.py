"""Exception types shared across the package."""


class DicError(Exception):
    """Base class for all package errors."""


class SpecError(DicError):
    """A channel specification is malformed (bad table, out-of-range symbol)."""


class UsageError(DicError):
    """Invalid arguments supplied by a caller (bad pmf string, unknown name)."""


class PreconditionError(DicError):
    """An operation was called on a channel that does not meet its hypotheses."""


class ResourceGuardError(DicError):
    """A requested computation exceeds a configured resource cap."""


class UnboundedRegionError(DicError):
    """Vertex enumeration was requested on an unbounded region."""


class AccuracyError(DicError):
    """Numerical integration failed to reach the requested tolerance."""

    def __init__(self, message, achieved):
        super().__init__(f"{message} (achieved error bound {achieved:.3g} bits)")
        self.achieved = achieved
