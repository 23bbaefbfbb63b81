"""Exception hierarchy shared across the package.

Every error raised by public API functions derives from :class:`PoskitError`
so callers can catch one base type. The CLI maps subtypes to exit codes:
config/schema problems exit 2, MCMC convergence failures exit 3, and
infeasible prior calibrations exit 4.
"""

from __future__ import annotations


class PoskitError(Exception):
    """Base error for this package."""


class DomainError(PoskitError, ValueError):
    """An argument violates a documented precondition."""


class SchemaError(PoskitError, ValueError):
    """An external input file or table violates its documented schema."""


class ConfigValidationError(PoskitError, ValueError):
    """A pipeline config document failed validation.

    Carries the full list of problems so callers see every violation at once.
    """

    def __init__(self, problems: list[str]):
        self.problems = list(problems)
        super().__init__("config validation failed:\n" + "\n".join(f"  - {p}" for p in self.problems))


class InitializationError(PoskitError):
    """MCMC could not start (non-finite log density at the initial point)."""


class StuckChainError(PoskitError):
    """A Metropolis block accepted nothing over a full adaptation window."""


class ConvergenceError(PoskitError):
    """Chains failed the convergence gate; carries the per-parameter R-hat table."""

    def __init__(self, message: str, rhat: dict[str, float] | None = None):
        self.rhat = dict(rhat or {})
        if self.rhat:
            table = ", ".join(f"{k}={v:.4f}" for k, v in self.rhat.items())
            message = f"{message} [split-Rhat: {table}]"
        super().__init__(message)


class CalibrationError(PoskitError):
    """Prior calibration is infeasible or too ill-conditioned to trust."""
