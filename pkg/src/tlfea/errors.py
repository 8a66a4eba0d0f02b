"""Exception hierarchy.

Every error raised deliberately by the library derives from
:class:`TlfeaError` so the CLI can map it to an exit code.
"""


class TlfeaError(Exception):
    """Base class for library errors."""


class UsageError(TlfeaError, ValueError):
    """Bad arguments, shapes or configuration."""


class InvalidMeshError(TlfeaError, ValueError):
    """Mesh violates a structural invariant."""


class InvertedElementError(TlfeaError):
    """Non-positive Jacobian determinant or deformation gradient."""

    def __init__(self, message, element=None, qp=None):
        super().__init__(message)
        self.element = element
        self.qp = qp


class StructuralError(TlfeaError):
    """Sparse pattern is missing an entry that must exist."""


class NotPositiveDefiniteError(TlfeaError):
    """Cholesky met a non-positive pivot."""

    def __init__(self, message, row=None):
        super().__init__(message)
        self.row = row


class SolverStateError(TlfeaError):
    """An operation was called in the wrong lifecycle phase."""


class DomainError(TlfeaError):
    """A collision primitive left the binning domain."""

    def __init__(self, message, triangle=None):
        super().__init__(message)
        self.triangle = triangle


class DegeneratePatchError(TlfeaError):
    """Patch normals cancel, so no contact normal can be defined."""


class ConfigError(UsageError):
    """Malformed configuration text; carries the offending line number."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line
