"""Exception taxonomy shared by the whole package.

The CLI maps these onto exit codes: InputError -> 2, ConvergenceError and
InternalError -> 3, failed checks -> 1.
"""


class PacingError(Exception):
    """Base class for all package-specific errors."""


class InputError(PacingError, ValueError):
    """Malformed input: bad message, infeasible allocation, schema violation."""


class DomainError(PacingError, ValueError):
    """An operation evaluated outside its mathematical domain.

    The canonical case: utility-from-prices with a zero-priced item the agent
    has positive click-through on, while spending money.
    """


class RangeError(PacingError, ValueError):
    """An inverse queried above the range of the function (bounded cost)."""


class SizeError(PacingError, ValueError):
    """A combinatorial routine was asked to exceed its enumeration budget."""


class ConvergenceError(PacingError, RuntimeError):
    """Iterative solve failed to reach tolerance; carries the best residuals."""

    def __init__(self, message: str, residuals: dict[str, float] | None = None):
        super().__init__(message)
        self.residuals = dict(residuals or {})


class InternalError(PacingError, RuntimeError):
    """An invariant the code relies on was violated; signals a bug."""
