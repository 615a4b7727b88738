"""Exception types shared across the package.

Domain failures (an orbit leaving the model ball, a Newton solve that does
not converge) derive from :class:`DomainError`.  Malformed input raises
:class:`SchemaError` or a plain ``ValueError``.
"""


class DomainError(Exception):
    """A well-posed request that the mathematics cannot satisfy."""


class BallExitError(DomainError):
    """An orbit or lift left the closed model ball B_r."""


class NonFiniteError(DomainError):
    """Integration produced a non-finite state."""


class ConvergenceError(DomainError):
    """Newton iteration exhausted its budget."""


class SingularJacobianError(DomainError):
    """Endpoint Jacobian too ill-conditioned to invert."""


class SchemaError(ValueError):
    """A model document does not follow the JSON schema."""


class ModelIndexError(SchemaError, IndexError):
    """A bracket expression references an index outside 1..q."""


class InfeasibleError(DomainError):
    """Requested displacement cannot be realised within the geometric constraints."""
