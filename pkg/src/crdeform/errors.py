"""Exception hierarchy shared by every module.

The CLI maps these onto exit codes, so new failure modes should subclass
one of the three families below rather than ``Exception`` directly.
"""

from __future__ import annotations


class CRDeformError(Exception):
    """Base class for all errors raised by the package."""


class InputError(CRDeformError, ValueError):
    """Malformed or inconsistent input (exit code 4)."""


class BudgetError(CRDeformError):
    """Truncation degree too small for the requested computation (exit code 3)."""


class VerificationError(CRDeformError):
    """A certificate or mapping check failed (exit code 2)."""


class BlockMismatchError(InputError):
    pass


class PreconditionError(InputError):
    pass


class PairingError(InputError):
    pass


class RealityError(InputError):
    pass


class NormalityError(InputError):
    pass


class DegreeExhaustedError(BudgetError):
    pass


class SingularJacobianError(InputError):
    """Raised when an implicit or inverse function solve meets a singular Jacobian.

    ``determinant`` holds the exact determinant that vanished (or the rank
    profile when the matrix is not square).
    """

    def __init__(self, message: str, determinant=None):
        super().__init__(message)
        self.determinant = determinant
