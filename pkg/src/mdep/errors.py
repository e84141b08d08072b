"""Exception types shared across the package."""


class MdepError(Exception):
    """Base class for all package errors."""


class ArityError(MdepError, ValueError):
    """A window or configuration has the wrong length."""


class DomainError(MdepError, ValueError):
    """An argument lies outside the domain of the operation."""


class ResourceError(MdepError, RuntimeError):
    """An enumeration or rejection budget was exceeded."""


class UnsupportedError(MdepError, ValueError):
    """The operation is not available for this source or statistic."""


class SpecFileError(MdepError, ValueError):
    """A factor or offspring specification file could not be parsed."""

    def __init__(self, message, field=None, line=None):
        where = []
        if line is not None:
            where.append(f"line {line}")
        if field is not None:
            where.append(f"field {field!r}")
        prefix = f"{', '.join(where)}: " if where else ""
        super().__init__(prefix + message)
        self.field = field
        self.line = line
