"""Exception hierarchy shared by all layers.

Everything user-facing derives from :class:`MeroconnError`.  The CLI maps
:class:`UserInputError` (and subclasses) to exit code 1 and
:class:`TheoremViolationError` to exit code 2; anything else is a bug.
"""

from __future__ import annotations


class MeroconnError(Exception):
    """Base class for all package errors."""

    code = "error"


class UserInputError(MeroconnError):
    """Malformed input file, expression, or option (exit code 1)."""

    code = "user-input"

    def __init__(self, message: str, line: int | None = None, col: int | None = None):
        super().__init__(message)
        self.line = line
        self.col = col


class PoleError(UserInputError):
    """Evaluation at a pole of a coefficient (e.g. specialization point)."""

    code = "pole"


class NotIntegrableError(UserInputError):
    """A two-variable system failed the integrability identity."""

    code = "not-integrable"


class CommonBranchError(UserInputError):
    """Intersection multiplicity requested for germs sharing a branch."""

    code = "common-branch"


class PrecisionError(MeroconnError):
    """A result would need more series coefficients than are known.

    Carries the precision that was available so drivers can retry higher.
    """

    code = "precision-exhausted"

    def __init__(self, message: str, available=None):
        super().__init__(message)
        self.available = available


class ExtensionRequiredError(MeroconnError):
    """An operation needs a root that does not exist in the current field.

    ``minpoly`` is the (squarefree) polynomial whose root must be adjoined;
    callers may extend the scalar field by it and retry.
    """

    code = "extension-required"

    def __init__(self, message: str, minpoly=None):
        super().__init__(message)
        self.minpoly = minpoly


class SingleClusterError(MeroconnError):
    """A residue split was requested but all eigenvalues fall in one cluster."""

    code = "single-cluster"


class InconsistentOperatorError(MeroconnError):
    """Operator data violates a structural polygon invariant."""

    code = "inconsistent-operator"


class UndecidableHereError(MeroconnError):
    """The bounded search implemented here cannot decide the question.

    Used by crossing-point projections when the input is an undecomposed
    system of rank above one.
    """

    code = "undecidable-here"

    def __init__(self, message: str, evidence=None):
        super().__init__(message)
        self.evidence = evidence


class TheoremViolationError(MeroconnError):
    """A theorem-backed inequality failed on concrete data (exit code 2)."""

    code = "theorem-violation"

    def __init__(self, message: str, details=None):
        super().__init__(message)
        self.details = details
