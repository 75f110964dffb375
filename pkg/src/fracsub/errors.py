"""Exception types shared across the package."""


class FracsubError(Exception):
    pass


class DomainError(FracsubError, ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class NonConvergenceError(FracsubError, RuntimeError):
    """An iteration (series, Newton) hit its cap before reaching tolerance."""


class StepError(FracsubError, RuntimeError):
    """A time step failed.

    ``step`` carries the index of the offending time level when known and
    ``tau`` the step size of the run (set by the convergence harness).
    """

    def __init__(self, message, step=None, tau=None):
        super().__init__(message)
        self.step = step
        self.tau = tau

    def __str__(self):
        msg = super().__str__()
        extra = []
        if self.step is not None:
            extra.append(f"step={self.step}")
        if self.tau is not None:
            extra.append(f"tau={self.tau!r}")
        return f"{msg} ({', '.join(extra)})" if extra else msg


class DivergenceError(StepError):
    """Nodal values left the representable/trusted range (blow-up)."""


class ConfigError(FracsubError, ValueError):
    """Malformed or inconsistent configuration document."""
