"""Exact local analysis of formal meromorphic connections.

Arbitrary-precision scalar towers (rationals, rational functions, algebraic
extensions), truncated ramified series, differential modules with Newton
polygons and exponential decompositions, parametric families with turning
loci, two-variable blow-up geometry, and a lattice-growth oracle, exposed
through a small service and CLI.
"""

__version__ = "0.1.0"

from .errors import (
    ExtensionRequiredError,
    MeroconnError,
    PrecisionError,
    TheoremViolationError,
    UserInputError,
)
from .fields import QQ, ExtensionField, FieldExtension, FunctionField

__all__ = [
    "QQ",
    "ExtensionField",
    "FieldExtension",
    "FunctionField",
    "MeroconnError",
    "UserInputError",
    "PrecisionError",
    "ExtensionRequiredError",
    "TheoremViolationError",
    "__version__",
]
