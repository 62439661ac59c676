"""Exception types shared across the package.

Every public operation raises one of these instead of a bare ValueError so
callers can tell a broken precondition apart from an input that is merely
outside the supported envelope.
"""

from __future__ import annotations

__all__ = [
    "ContractError",
    "UnsupportedInputError",
    "ResourceLimitError",
    "DegeneratePairError",
    "DivergenceError",
    "CloudParseError",
]


class ContractError(ValueError):
    """A documented precondition or invariant was violated by the caller."""


class UnsupportedInputError(ValueError):
    """Input is well formed but outside what the operation supports."""


class ResourceLimitError(RuntimeError):
    """Input exceeds a hard size cap (e.g. the exact-solver point budget)."""


class DegeneratePairError(RuntimeError):
    """Paired sampling kept drawing coincident points and gave up."""


class DivergenceError(RuntimeError):
    """A particle flow produced non-finite coordinates.

    Carries the iteration index at which the first non-finite value appeared.
    """

    def __init__(self, iteration: int, message: str | None = None):
        self.iteration = int(iteration)
        super().__init__(message or f"flow diverged at iteration {self.iteration}")


class CloudParseError(ValueError):
    """A point-cloud CSV could not be parsed.

    Carries the 1-based line number of the offending row.
    """

    def __init__(self, row: int, message: str):
        self.row = int(row)
        super().__init__(f"line {self.row}: {message}")
