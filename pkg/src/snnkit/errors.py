"""Exception types shared across the toolkit."""


class SnnKitError(Exception):
    """Base class for all toolkit failures."""


class ModelFormatError(SnnKitError):
    """Malformed model document: bad JSON, unknown fields, wrong weight counts."""


class ValidationError(SnnKitError):
    """Layer shapes do not compose into a runnable network."""


class EventFormatError(SnnKitError):
    """Malformed event file (binary record layout or CSV line)."""


class ShapeError(SnnKitError):
    """Runtime tensor shape mismatch inside the engine."""


class PlanError(SnnKitError):
    """A prune plan that cannot be applied (e.g. it would empty a layer)."""
