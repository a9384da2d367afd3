"""Exception hierarchy.

Three families matter to callers (and map to distinct CLI exit codes):
validation problems in user-supplied data or configuration
(:class:`ValidationError` and subclasses), I/O problems (plain
:class:`OSError` from the stdlib), and violated internal invariants
(:class:`InternalInvariantError`, which always indicates a bug here rather
than bad input).
"""

from __future__ import annotations


class ValidationError(ValueError):
    """Invalid input data or configuration supplied by the caller."""


class PoolFormatError(ValidationError):
    """A pool file or record does not conform to the line-delimited format."""


class EmbeddingFormatError(ValidationError):
    """An embedding file is malformed or inconsistent with its vocabulary."""


class GraphArtifactError(ValidationError):
    """A graph artifact is malformed, version-incompatible, or does not
    match the pool it is being used with."""


class ConfigError(ValidationError):
    """Invalid run configuration (unknown keys, out-of-range values)."""


class InternalInvariantError(AssertionError):
    """An internal consistency check failed; this is a bug, not bad input."""
