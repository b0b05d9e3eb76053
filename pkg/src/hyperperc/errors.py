"""Exception types shared across the package.

The CLI maps these onto exit codes, so library code should raise one of
these (or a subclass) for any user-facing failure.
"""


class InvalidInputError(ValueError):
    """Malformed or inconsistent input: bad partitions, bad measures,
    size mismatches, broken embeddings, unsupported modes."""


class CapacityError(InvalidInputError):
    """Input is valid but beyond a documented exhaustive-enumeration bound."""


class EmbeddingError(InvalidInputError):
    """Hyperedge polygons cross or overlap; the drawing is not a plane
    hypergraph."""


class UnsupportedModeError(InvalidInputError):
    """Operation requires a different window mode (e.g. torus wrap)."""
