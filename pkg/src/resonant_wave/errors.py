"""Exception hierarchy shared by the solver modules and the CLI."""


class WaveError(Exception):
    """Base class. ``exit_code`` is what the CLI returns when this escapes."""

    exit_code = 3


class ConfigError(WaveError):
    """Malformed configuration text (exit 1)."""

    exit_code = 1

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class ValidationError(WaveError, ValueError):
    """Well-formed input that violates an invariant (exit 2)."""

    exit_code = 2

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class InvalidCutoffError(ValidationError):
    pass


class DomainError(WaveError, ValueError):
    """An operator was applied outside the subspace it is defined on."""


class AmplitudeOutOfRangeError(WaveError):
    def __init__(self, max_amplitude, rho):
        self.max_amplitude = float(max_amplitude)
        self.rho = float(rho)
        super().__init__(
            f"max |delta*u| = {self.max_amplitude:.6g} outside the convergence radius {self.rho:.6g}"
        )


class ContractionFailure(WaveError):
    """Picard/Neumann iteration did not contract; usually N is too small."""

    def __init__(self, ratio, message="iteration is not a contraction"):
        self.ratio = float(ratio)
        super().__init__(f"{message} (observed ratio {self.ratio:.4g})")


class InversionFailure(WaveError):
    """Neumann series for the linearized operator diverged."""

    def __init__(self, ratio):
        self.ratio = float(ratio)
        super().__init__(f"Neumann series diverged (ratio {self.ratio:.4g})")


class NonConvergenceError(WaveError):
    def __init__(self, message, history=()):
        self.history = list(history)
        super().__init__(message)


class SearchFailure(WaveError):
    pass


class DegenerateNonlinearityError(ValidationError):
    pass


class DiophantineRejection(WaveError):
    """Raised by commands that require an accepted parameter (exit 4)."""

    exit_code = 4

    def __init__(self, stage, message="parameter rejected by the Diophantine screen"):
        self.stage = stage
        super().__init__(f"{message} at stage {stage}")
