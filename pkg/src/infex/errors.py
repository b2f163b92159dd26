"""Exception types shared across the package.

Every failure mode of the library raises one of these (or a builtin
``ValueError``/``IndexError`` where that is the natural fit), so callers
can catch ``InfexError`` to handle any library-level problem.
"""


class InfexError(Exception):
    """Base class for all library errors."""


class FormatError(InfexError):
    """Byte stream is not a well-formed tensor file (bad magic, header, ...)."""


class UnsupportedLayout(InfexError):
    """Tensor file declares column-major (Fortran) element order."""


class UnsupportedDtype(InfexError):
    """Tensor file declares an element type other than little-endian f4/f8."""


class TruncatedFile(InfexError):
    """Tensor payload length does not match the declared shape."""


class RangeError(InfexError):
    """Value cannot be represented in the requested element type."""


class SchemaError(InfexError):
    """Record file violates its documented schema."""


class DuplicateId(SchemaError):
    """Manifest contains two records with the same example id."""


class ShapeError(InfexError):
    """Array rank or length does not match what the operation requires."""


class DomainError(InfexError):
    """Array element outside the operation's value domain (negative, NaN, ...)."""


class EmptyDataset(InfexError):
    """An operation that needs at least one sample received none."""


class UnknownClass(InfexError):
    """Class label has no entry in the frequent-feature table."""
