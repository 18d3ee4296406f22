"""Exception hierarchy shared by the simulator, the analysis layer and the CLI."""


class RamanError(Exception):
    """Base class for every error raised by this package."""


class DomainError(RamanError, ValueError):
    """An argument lies outside the domain of a formula (e.g. non-positive power)."""


class NoThresholdError(RamanError):
    """The net gain never crosses the loss: the model is miscalibrated."""


class IntegrationError(RamanError):
    """The integrator produced a non-finite state."""

    def __init__(self, message, t=None):
        super().__init__(message)
        self.t = t


class StiffnessError(IntegrationError):
    """Adaptive step size collapsed below the underflow limit."""


class InsufficientDataError(RamanError):
    """A time series is too short for the requested analysis."""


class NoGenerationError(RamanError):
    """No detection-level crossing was found on a hysteresis branch."""

    def __init__(self, message, f_mod=None):
        super().__init__(message)
        self.f_mod = f_mod


class FitError(RamanError):
    """Least-squares design matrix is rank deficient."""


class ConfigError(RamanError):
    """Invalid run configuration; carries the offending line and key when known."""

    def __init__(self, message, line=None, key=None):
        where = []
        if line is not None:
            where.append(f"line {line}")
        if key is not None:
            where.append(f"key '{key}'")
        prefix = ", ".join(where)
        super().__init__(f"{prefix}: {message}" if prefix else message)
        self.line = line
        self.key = key
