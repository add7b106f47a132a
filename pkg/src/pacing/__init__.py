"""Pacing equilibria for budget-constrained autobidders.

Core entry points:

- agents: preference families (valuations, money costs), AgentType, Instance
- fppe: first-price pacing equilibrium solvers, verifier, brute-force oracle
- metagame: budget/value reporting game — best responses, Nash verification,
  single-item equilibrium characterization and constructors
- welfare: liquid welfare, its optimum, price-of-anarchy ratios
- cli: file-driven runs and the scenario registry
"""

from .errors import (
    ConvergenceError,
    DomainError,
    InputError,
    InternalError,
    PacingError,
    RangeError,
    SizeError,
)
from .numerics import DEFAULT_TOLS, INF, Tolerances

__all__ = [
    "ConvergenceError",
    "DomainError",
    "InputError",
    "InternalError",
    "PacingError",
    "RangeError",
    "SizeError",
    "DEFAULT_TOLS",
    "INF",
    "Tolerances",
]

__version__ = "0.1.0"
