"""Exception hierarchy.

Errors fall in three families that the command line maps to exit codes:
input/schema problems, numerical failures, and resource guards.
"""
from __future__ import annotations


class AnnealingLabError(Exception):
    """Base class for all package errors."""


class SchemaError(AnnealingLabError, ValueError):
    """Malformed input file or configuration."""


class GuardExceededError(AnnealingLabError, ValueError):
    """Problem size beyond what exhaustive methods allow."""


class NumericalError(AnnealingLabError, RuntimeError):
    """A numerical check or solver failed."""


class DetailedBalanceError(NumericalError):
    pass


class NotHermitianError(NumericalError):
    pass


class NotFrustrationFreeError(NumericalError):
    pass


class ConvergenceError(NumericalError):
    pass


class IntegrationError(NumericalError):
    pass


class ColoringError(NumericalError):
    pass


class DegenerateStepError(NumericalError):
    pass


class SubspaceLeakageError(NumericalError):
    pass


class MissingArtifactError(AnnealingLabError, FileNotFoundError):
    pass
