"""Exception hierarchy shared by all relq modules."""

from __future__ import annotations


class RelqError(Exception):
    """Base class for every error raised by relq."""


class SyntaxErrorAt(RelqError):
    """A parse failure with a 1-based source location."""

    def __init__(self, message: str, line: int, column: int = 0, source: str = "<input>"):
        self.message = message
        self.line = line
        self.column = column
        self.source = source
        loc = f"{source}:{line}" + (f":{column}" if column else "")
        super().__init__(f"{loc}: {message}")


class MetamodelError(RelqError):
    pass


class ModelError(RelqError):
    pass


class AmbiguousKeyError(ModelError):
    pass


class EvalError(RelqError):
    pass


class TransformationError(RelqError):
    """Static problem in a transformation definition."""


class EngineError(RelqError):
    """Failure while executing a transformation."""


class DiffConflictError(EngineError):
    pass
