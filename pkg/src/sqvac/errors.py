"""Exception hierarchy shared by every module."""


class SqvacError(Exception):
    """Base class for all errors raised by this package."""


class ValidationError(SqvacError, ValueError):
    """Input violates a precondition (bad parameter, mismatched dimensions)."""


class CutoffError(ValidationError):
    """Fock cutoff is too small for the requested state or operation."""


class DegenerateCodewordError(ValidationError):
    """A codeword superposition vanishes and cannot be normalized."""


class UnreachableBranchError(SqvacError, RuntimeError):
    """A measurement outcome was selected whose probability is numerically zero."""


class KrausCapExceeded(SqvacError, RuntimeError):
    """The Kraus-series search hit its hard cap before reaching the completeness target."""

    def __init__(self, message, achieved_defect):
        super().__init__(message)
        self.achieved_defect = achieved_defect


class UncertifiedKrausSet(ValidationError):
    """A Kraus family whose completeness defect exceeds its tolerance was used."""


class ConvergenceError(SqvacError, RuntimeError):
    """An iterative search did not converge."""
