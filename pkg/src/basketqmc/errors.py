"""Exception types raised across the package."""


class BasketQMCError(Exception):
    """Base class for all package errors."""


class ValidationError(BasketQMCError, ValueError):
    """Invalid input: bad parameters, shapes, or configuration values."""


class DomainError(ValidationError):
    """An argument lies outside the mathematical domain of an operation."""


class UnsupportedDimensionError(ValidationError):
    """More dimensions were requested than the direction-number table holds."""


class FactorizationError(BasketQMCError, ArithmeticError):
    """A matrix factorization failed (not positive definite, no convergence)."""

    def __init__(self, message, index=None):
        super().__init__(message)
        self.index = index
