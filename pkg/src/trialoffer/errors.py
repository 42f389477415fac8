"""Exception hierarchy for the trialoffer package."""

from __future__ import annotations


class TrialOfferError(Exception):
    """Base class for every error raised by this package."""


class InvalidSignalError(TrialOfferError, ValueError):
    pass


class UnsupportedVariantError(TrialOfferError, ValueError):
    pass


class DomainError(TrialOfferError, ValueError):
    pass


class SingularityError(TrialOfferError, ArithmeticError):
    pass


class PreconditionError(TrialOfferError, ValueError):
    pass


class SizeError(TrialOfferError, ValueError):
    pass


class StepSizeError(TrialOfferError, ArithmeticError):
    pass


class ConfigMismatchError(TrialOfferError, ValueError):
    pass


class SchemaError(TrialOfferError, ValueError):
    """Malformed dataset file; ``row`` is the 1-based line number when known."""

    def __init__(self, message: str, row: int | None = None) -> None:
        self.row = row
        if row is not None:
            message = f"row {row}: {message}"
        super().__init__(message)


class ConfigError(TrialOfferError, ValueError):
    """Carries every validation problem found, not just the first."""

    def __init__(self, errors: list[str]) -> None:
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))
