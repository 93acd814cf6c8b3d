"""Exception hierarchy.

Two families matter to callers (and to the CLI exit codes): a scheme or
boundary condition that violates a structural/spectral assumption, and a
numerical procedure that could not deliver the requested accuracy.
"""


class FdstabError(Exception):
    """Base class for all package errors."""


class AssumptionError(FdstabError, ValueError):
    """The scheme or its boundary condition violates a required assumption."""


class NumericalError(FdstabError, RuntimeError):
    """A numerical construction failed (ill-conditioning, ambiguity, window)."""


class SplittingError(NumericalError):
    """Eigenvalues of the companion matrix cannot be cleanly classified."""


class BranchAmbiguityError(NumericalError):
    """The eigenvalue branch through kappa(1) = 1 cannot be identified."""


class SingularBoundaryError(NumericalError):
    """B restricted to the stable subspace is (numerically) singular."""


class WindowError(NumericalError):
    """The computational window is too small for an exact propagation."""


class CertificateError(NumericalError):
    """A fitted bound was contradicted by sampled data."""
