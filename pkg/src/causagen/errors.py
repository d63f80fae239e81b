"""Exception hierarchy. Everything user-facing derives from CausagenError
so the CLI can map it to a data/validation exit code."""


class CausagenError(Exception):
    """Base class for data, schema, and configuration errors."""


class SchemaError(CausagenError):
    """Schema violated: unknown category, bad column kind, name clash."""


class DataError(CausagenError):
    """Malformed or insufficient data: ragged rows, too few samples."""


class GraphError(CausagenError):
    """Invalid graph structure: cycles, unknown nodes, edge conflicts."""


class CiTestError(CausagenError):
    """A conditional independence test could not be evaluated
    (constant column, too few rows, empty contingency table)."""
