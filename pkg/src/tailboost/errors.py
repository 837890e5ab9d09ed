"""Exception hierarchy shared across the package."""


class TailboostError(Exception):
    """Base class for errors raised by this package."""


class ParseError(TailboostError):
    """Malformed input data (CSV cells, config files, model containers)."""


class PreconditionError(TailboostError):
    """An operation was called on data that violates its contract."""


class NonConvergenceError(TailboostError):
    """An iterative fit failed to produce a usable estimate."""
