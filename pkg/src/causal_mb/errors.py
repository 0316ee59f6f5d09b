"""Exception hierarchy shared by all modules."""


class CausalMBError(Exception):
    """Base class for errors raised by this package."""


class GraphError(CausalMBError, ValueError):
    """Malformed graph, unknown node, or violated graph precondition."""


class SchemaError(CausalMBError, ValueError):
    """Dataset schema mismatch, unknown variable, or out-of-range category."""


class CapacityError(CausalMBError):
    """A search space exceeds its configured enumeration cap."""


class ZeroProbabilityEvidence(CausalMBError):
    """Conditioning evidence has probability zero under the model."""
