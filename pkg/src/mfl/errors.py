"""Exception hierarchy shared across the package."""


class MflError(Exception):
    """Base class for all package errors."""


class ConfigError(MflError):
    """Invalid configuration value or malformed config file."""


class DivergenceError(MflError):
    """A particle update produced a non-finite or absurdly large entry.

    Carries the step index at which the blow-up was detected.
    """

    def __init__(self, step: int, message: str = ""):
        self.step = step
        # Records collected before the blow-up; attached by run_chain.
        self.records: list = []
        super().__init__(message or f"divergence detected at step {step}")


class NumericalError(MflError):
    """A numerically impossible intermediate (e.g. negative radicand)."""


class OracleError(MflError):
    """An independent verification computation could not be completed."""
