"""Exception types shared across the toolkit."""


class SynthforgeError(Exception):
    """Base class for all toolkit errors."""


class ParameterError(SynthforgeError, ValueError):
    """A spec or argument violates its invariants."""


class EmptyInputError(SynthforgeError):
    """An operation that needs data received an empty mesh or dataset."""


class DegenerateInputError(SynthforgeError):
    """Geometry too degenerate to process (zero-diagonal bounding box etc.)."""


class GenerationExhaustedError(SynthforgeError):
    """Too many consecutive quality-control rejections; parameter ranges are pathological."""


class DivergenceError(SynthforgeError):
    """A chaos-game orbit escaped; the system is not usable."""


class NumericError(SynthforgeError):
    """A numeric routine produced non-finite results."""


class ContractViolationError(SynthforgeError):
    """Caller broke an internal contract (e.g. incomplete correspondence map)."""


class CapacityError(SynthforgeError):
    """A source database has fewer classes or images than requested."""


class ManifestError(SynthforgeError):
    """Dataset manifest is missing or unparseable."""
