class NSDDEError(Exception):
    """Base class for every error raised by the nsdde package."""


class InvalidArgumentError(NSDDEError, ValueError):
    pass


class GridIncompatibleError(InvalidArgumentError):
    """T is not an integer multiple of h = tau/m."""


class StepTooLargeError(InvalidArgumentError):
    """h = tau/m does not lie in (0, 1)."""


class OutOfRangeError(InvalidArgumentError):
    pass


class CannotFitError(NSDDEError):
    """A log-linear fit was requested over data it cannot be fitted to."""


class PathDivergedError(NSDDEError, ArithmeticError):
    def __init__(self, step_index, value=None):
        self.step_index = step_index
        self.value = value
        super().__init__(
            f"path diverged at step {step_index} (|Y| = {value})"
        )


class HypothesisViolatedError(NSDDEError):
    """f(1) >= 0, so no decay base C > 1 can be constructed."""

    def __init__(self, f_at_one, gap):
        self.f_at_one = f_at_one
        self.gap = gap
        super().__init__(
            f"f(1) = {f_at_one!r} >= 0; the construction needs "
            f"lambda2 > lambda3 + 4*K_tilde (lambda2 - lambda3 - 4*K_tilde "
            f"= {gap!r})"
        )


class ConfigError(InvalidArgumentError):
    def __init__(self, message, key=None):
        self.key = key
        super().__init__(message)


class OutputWriteError(NSDDEError, OSError):
    def __init__(self, path, reason):
        self.path = path
        super().__init__(f"could not write {path}: {reason}")
