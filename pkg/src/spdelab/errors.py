"""Exception hierarchy; the CLI maps these onto exit statuses."""


class SpdeLabError(Exception):
    """Base class for all package errors."""


class ConfigurationError(SpdeLabError, ValueError):
    """Invalid configuration, mesh, model or sampling parameters."""


class DataError(SpdeLabError, ValueError):
    """Inconsistent or missing data, e.g. mismatched partitions."""


class NumericError(SpdeLabError, FloatingPointError):
    """Non-finite values produced or supplied."""


class SolverError(SpdeLabError, RuntimeError):
    """Nonlinear solve failed to reach its tolerance."""

    def __init__(self, message, residual=float("nan"), step=None):
        super().__init__(message)
        self.residual = residual
        self.step = step

    def __str__(self):
        base = super().__str__()
        if self.step is not None:
            base = f"step {self.step}: {base}"
        return f"{base} (last residual {self.residual:.3e})"


class ValidationError(SpdeLabError, ValueError):
    """A model constant is not finite."""
