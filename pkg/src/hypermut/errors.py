"""Exception types raised by the numerical routines."""


class HypermutError(Exception):
    """Base class for all errors raised by this package."""


class DomainError(HypermutError, ValueError):
    """An argument lies outside the domain where the quantity is defined."""


class PoleAtArgument(DomainError):
    """A rational function was evaluated exactly at one of its poles."""


class NonConvergence(HypermutError, ArithmeticError):
    """A truncated series hit its term cap before meeting the tolerance."""

    def __init__(self, message, terms_used=None, last_term=None):
        super().__init__(message)
        self.terms_used = terms_used
        self.last_term = last_term


class SingularSystem(HypermutError, ArithmeticError):
    """A linear solve broke down, usually because the chain is reducible."""


class AllCensored(HypermutError, RuntimeError):
    """Every Monte Carlo trial reached the step cap without hitting the target."""
