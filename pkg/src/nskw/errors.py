"""Exception types shared across the package."""


class NonFiniteFieldError(ValueError):
    """A field sample is NaN or infinite."""

    def __init__(self, msg="non-finite field"):
        super().__init__(msg)


class VacuumError(ValueError):
    """Density dropped below the configured floor."""

    def __init__(self, msg="vacuum region"):
        super().__init__(msg)


class ConfigError(ValueError):
    """Invalid configuration file or parameter set."""

    def __init__(self, msg, line=None):
        self.line = line
        if line is not None:
            msg = f"line {line}: {msg}"
        super().__init__(msg)


class StepRejected(RuntimeError):
    """A time step produced an inadmissible state."""


class BlowUpError(StepRejected):
    """Non-finite values appeared during the right-hand-side evaluation."""
