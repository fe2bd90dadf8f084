"""Exception taxonomy shared across the package.

The CLI maps these onto process exit codes: ConfigError -> 1, NumericalError
(and subclasses) -> 2, VerificationFailure -> 3.
"""

from __future__ import annotations

import numpy as np


class GomspError(Exception):
    """Base class for all package-specific errors."""


class InvalidInputError(GomspError, ValueError):
    """Malformed argument: wrong shape, non-finite entries, bad sign."""


class DomainError(GomspError, ValueError):
    """A point lies outside the feasible set beyond tolerance."""


class ConfigError(GomspError, ValueError):
    """Experiment configuration failed validation."""


class NumericalError(GomspError, RuntimeError):
    """An iterative routine failed to converge.

    Carries the best iterate seen and the iteration count so callers can
    inspect or salvage partial progress.
    """

    def __init__(self, message: str, *, best_iterate: np.ndarray | None = None,
                 iterations: int | None = None):
        super().__init__(message)
        self.best_iterate = best_iterate
        self.iterations = iterations


class InfeasibleSlotError(NumericalError):
    """The per-slot benchmark problem appears infeasible: the penalty
    minimizer's constraint violation stopped shrinking across doublings."""


class EmptyRecordError(GomspError, ValueError):
    """Time averages requested from a record with zero counted slots."""


class VerificationFailure(GomspError, RuntimeError):
    """One or more verification-suite properties failed."""
