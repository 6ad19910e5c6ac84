"""Exception types shared across the package."""

from __future__ import annotations


class EnergyShareError(Exception):
    """Base class for all errors raised by this package."""


class ParameterError(EnergyShareError):
    """A caller-supplied parameter or configuration value is out of range."""


class InstanceValidationError(EnergyShareError):
    """A composition was attempted on an instance that fails validation.

    Carries the full list of violations so callers can report them all.
    """

    def __init__(self, violations):
        self.violations = list(violations)
        lines = "; ".join(str(v) for v in self.violations)
        super().__init__(f"invalid instance ({len(self.violations)} violations): {lines}")


class UndefinedRatioError(EnergyShareError):
    """A ratio metric was requested over an empty denominator."""


class BudgetError(EnergyShareError):
    """An instance exceeds the exhaustive-search budget."""


class IngestError(EnergyShareError):
    """A CSV dataset could not be ingested (missing column, bad row, empty file)."""
