"""Exception hierarchy shared across the package.

The CLI maps these onto exit codes: parameter problems exit 2, everything
else exits 1.
"""


class DbLshError(Exception):
    """Base class for all errors raised by this package."""


class ParameterError(DbLshError, ValueError):
    """A value violates an operation's domain (c <= 1, tau <= 0, k > n, ...)."""


class FvecsFormatError(DbLshError):
    """Malformed fvecs file; the message names the byte offset."""


class DimensionMismatchError(DbLshError):
    """Vector dimensionality disagrees with what the context requires."""


class BuildError(DbLshError):
    """Index construction failed (empty input, inconsistent shapes)."""


class IndexFormatError(DbLshError):
    """Index file is not readable: bad magic, version, or truncation."""


class ChecksumError(DbLshError):
    """Index file was built from a different dataset than the one supplied."""
