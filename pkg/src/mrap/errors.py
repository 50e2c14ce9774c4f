"""Exception types shared across the package."""
from __future__ import annotations


class MrapError(Exception):
    """Base class for all package errors."""


class ParseError(MrapError):
    """A data file violated its line format. Carries the 1-based line number."""

    def __init__(self, message: str, line_no: int):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


class DataError(MrapError):
    """Loaded data cannot support the requested operation."""


class FitError(MrapError):
    """A regression model could not be fitted or derived."""


class InsufficientSupportError(FitError):
    """Fewer training pairs than the fit requires."""


class DegenerateRegressorError(FitError):
    """The independent variable has zero variance over the training pairs."""


class NonInvertibleSlopeError(FitError):
    """Slope too close to zero for the reverse model to be derived."""


class SingularSystemError(MrapError):
    """The fixed-point linear system has a singular component.

    ``targets`` lists the (entity label, attribute label) pairs that form the
    underdetermined component.
    """

    def __init__(self, message: str, targets: list[tuple[str, str]]):
        super().__init__(message)
        self.targets = targets


class ConfigError(MrapError):
    """Invalid configuration value or combination (usage error for the CLI)."""
